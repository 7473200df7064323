"""Histogram of observation points and the reliable regions derived from it.

Bins follow ``I_1 = [0, d]`` and ``I_j = ((j-1)d, jd]`` for ``j = 2..M``.
The indicator value on bin ``j`` is ``N_j / (N d)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

K_STAR = 32.0
# smallest admissible run length, q - p >= 2 sqrt(K*)
MIN_REGION_BINS = math.ceil(2.0 * math.sqrt(K_STAR))
DEFAULT_GAMMA = 0.1


def bin_index(M: int, x: float) -> int:
    """1-based bin of ``x``; edges are the floats ``j * (1/M)``."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x!r} is outside [0, 1]")
    d = 1.0 / M
    if x <= d:
        return 1
    j = min(max(math.ceil(x / d), 2), M)
    # x/d can round across an edge; correct against the float edges
    if x <= (j - 1) * d:
        j -= 1
    elif x > j * d and j < M:
        j += 1
    return j


def bin_index_many(M: int, x) -> np.ndarray:
    """Vectorized :func:`bin_index`, returning 1-based bins."""
    x = np.asarray(x, dtype=np.float64)
    if x.size and not (np.all(x >= 0.0) and np.all(x <= 1.0)):
        raise ValueError("observation points must lie in [0, 1]")
    d = 1.0 / M
    j = np.clip(np.ceil(x / d).astype(np.int64), 2, M)
    j = np.where(x <= (j - 1) * d, j - 1, j)
    j = np.where((x > j * d) & (j < M), j + 1, j)
    return np.where(x <= d, 1, j)


class HistogramIndicator:
    """Bin counts ``N_1..N_M`` over [0, 1]."""

    def __init__(self, M: int, counts=None):
        if M < 1:
            raise ValueError("M must be positive")
        self.M = int(M)
        if counts is None:
            self.counts = [0] * self.M
        else:
            counts = [int(c) for c in counts]
            if len(counts) != self.M or min(counts) < 0:
                raise ValueError("counts must be M nonnegative integers")
            self.counts = counts

    @property
    def d(self) -> float:
        return 1.0 / self.M

    @property
    def total(self) -> int:
        return sum(self.counts)

    def add(self, x: float) -> None:
        self.counts[bin_index(self.M, x) - 1] += 1

    def add_many(self, x) -> None:
        j = bin_index_many(self.M, x)
        inc = np.bincount(j - 1, minlength=self.M)
        self.counts = [c + int(i) for c, i in zip(self.counts, inc)]

    def copy(self) -> "HistogramIndicator":
        return HistogramIndicator(self.M, self.counts)

    def rho_values(self) -> np.ndarray:
        """``rho_{N,j}`` for ``j = 1..M`` (all zero before any sample)."""
        n = self.total
        if n == 0:
            return np.zeros(self.M)
        return np.asarray(self.counts, dtype=np.float64) / (n * self.d)

    def rho(self, x: float) -> float:
        if not 0.0 <= x <= 1.0:
            return 0.0
        n = self.total
        if n == 0:
            return 0.0
        return self.counts[bin_index(self.M, x) - 1] / (n * self.d)

    @property
    def beta(self) -> float:
        """Upper bound of the indicator over [0, 1]."""
        return float(self.rho_values().max())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_index", "left_edge", "right_edge", "count", "rho"])
        d = self.d
        for j, (c, r) in enumerate(zip(self.counts, self.rho_values()), start=1):
            w.writerow([j, repr((j - 1) * d), repr(j * d), c, repr(float(r))])
        return buf.getvalue()

    def __eq__(self, other):
        if not isinstance(other, HistogramIndicator):
            return NotImplemented
        return self.M == other.M and self.counts == other.counts

    def __repr__(self):
        return f"HistogramIndicator(M={self.M}, total={self.total})"


@dataclass(frozen=True)
class ReliableRegion:
    """Open interval ``(p d, q d)`` on which the indicator stays ``>= gamma``."""

    p: int
    q: int
    gamma: float
    M: int

    @property
    def left(self) -> float:
        return self.p / self.M

    @property
    def right(self) -> float:
        return self.q / self.M

    @property
    def interval(self) -> tuple[float, float]:
        return self.left, self.right

    @property
    def width_bins(self) -> int:
        return self.q - self.p

    def as_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "left": self.left, "right": self.right, "gamma": self.gamma}


def reliable_regions(hist: HistogramIndicator, gamma: float = DEFAULT_GAMMA) -> list[ReliableRegion]:
    """Maximal runs of at least ``MIN_REGION_BINS`` bins with ``rho >= gamma``.

    Each region reports the smallest indicator value in its run as ``gamma``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    rho = hist.rho_values()
    out = []
    start = None
    for j in range(hist.M + 1):
        ok = j < hist.M and rho[j] >= gamma
        if ok and start is None:
            start = j
        elif not ok and start is not None:
            if j - start >= MIN_REGION_BINS:
                out.append(ReliableRegion(start, j, float(rho[start:j].min()), hist.M))
            start = None
    return out
