"""Online penalized cubic-spline estimator.

Each sample ``(x, y)`` touches at most 4 basis functions, so ingestion only
updates a 4x4 block of the Gram sums and 4 entries of the right-hand side.
The fit solves

    (alpha * P + A_N) lambda = b_N,   A_N = (1/N) sum H_x^T H_x,  b_N = (1/N) sum H_x^T y

with a banded Cholesky factorization in O(M).
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .banded import BandedSymMatrix, axpy_banded, cholesky_solve
from .bspline import SplineBasis, local_values, penalty_matrix
from .indicator import HistogramIndicator, bin_index, bin_index_many

MAGIC = b"SPLNDIFF"
CHECKPOINT_VERSION = 1


class EstimatorError(Exception):
    pass


class EmptyState(EstimatorError):
    """No samples have been ingested yet."""


class DegenerateDesign(EstimatorError):
    """The normal equations are not guaranteed to be solvable."""


class CheckpointError(EstimatorError):
    pass


class VersionMismatch(CheckpointError):
    pass


class CorruptPayload(CheckpointError):
    pass


@dataclass(frozen=True)
class SplineFit:
    """Fitted coefficients ``lambda_N`` together with their basis."""

    basis: SplineBasis
    coeffs: np.ndarray
    alpha: float
    n_fit: int

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        if c.shape != (self.basis.dim,):
            raise ValueError(f"expected {self.basis.dim} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def value(self, x):
        """``f_N(x)``; accepts scalars or arrays."""
        out = self.basis.evaluate(self.coeffs, np.atleast_1d(x))
        return float(out[0]) if np.ndim(x) == 0 else out

    def derivative(self, x):
        """``f_N'(x)``."""
        out = self.basis.evaluate_d1(self.coeffs, np.atleast_1d(x))
        return float(out[0]) if np.ndim(x) == 0 else out

    def second_derivative(self, x):
        out = self.basis.evaluate_d2(self.coeffs, np.atleast_1d(x))
        return float(out[0]) if np.ndim(x) == 0 else out

    def evaluate(self, x):
        """Return ``(f_N(x), f_N'(x))``."""
        return self.value(x), self.derivative(x)

    __call__ = value

    def roughness(self) -> float:
        """``||f_N''||^2`` over (0, 1)."""
        return penalty_matrix(self.basis).quad_form(self.coeffs)

    def to_json_dict(self, sigma2: float | None = None) -> dict:
        return {
            "M": self.basis.M,
            "sigma2": sigma2,
            "alpha": self.alpha,
            "n": self.n_fit,
            "lambda": [float(v) for v in self.coeffs],
        }


class EstimatorState:
    """Streaming sufficient statistics for the penalized spline fit.

    Sums (not averages) are accumulated so that an ingest costs O(1)
    regardless of ``M``; :attr:`A` and :attr:`b` divide by ``n_seen`` on
    access.

    Parameters
    ----------
    M : int
        Number of knot cells.
    sigma2 : float
        Noise variance, assumed known.
    """

    def __init__(self, M: int, sigma2: float):
        if isinstance(M, bool) or not isinstance(M, (int, np.integer)) or M < 1:
            raise ValueError(f"M must be a positive integer, got {M!r}")
        sigma2 = float(sigma2)
        if not (math.isfinite(sigma2) and sigma2 > 0.0):
            raise ValueError(f"sigma2 must be positive and finite, got {sigma2!r}")
        self.basis = SplineBasis(int(M))
        self.sigma2 = sigma2
        self.penalty = penalty_matrix(self.basis)
        n = self.basis.dim
        # _gram[k][i] is the sum of H[i+k] * H[i] over all samples
        self._gram = [[0.0] * n for _ in range(4)]
        self._rhs = [0.0] * n
        self._ysq = 0.0
        self._xmin = math.inf
        self._xmax = -math.inf
        self.n_seen = 0
        self.histogram = HistogramIndicator(self.basis.M)

    @property
    def M(self) -> int:
        return self.basis.M

    @property
    def d(self) -> float:
        return self.basis.d

    # -- ingestion -------------------------------------------------------

    def ingest(self, x: float, y: float) -> None:
        """Add one sample.  Invalid samples raise and leave the state untouched."""
        x = float(x)
        y = float(y)
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"x={x!r} is outside [0, 1]")
        if not math.isfinite(y):
            raise ValueError(f"y={y!r} is not finite")
        M = self.basis.M
        u = x * M
        k = min(int(u), M - 1)
        h0, h1, h2, h3 = local_values(u - k)
        g0, g1, g2, g3 = self._gram
        g0[k] += h0 * h0
        g0[k + 1] += h1 * h1
        g0[k + 2] += h2 * h2
        g0[k + 3] += h3 * h3
        g1[k] += h1 * h0
        g1[k + 1] += h2 * h1
        g1[k + 2] += h3 * h2
        g2[k] += h2 * h0
        g2[k + 1] += h3 * h1
        g3[k] += h3 * h0
        r = self._rhs
        r[k] += h0 * y
        r[k + 1] += h1 * y
        r[k + 2] += h2 * y
        r[k + 3] += h3 * y
        self._ysq += y * y
        if x < self._xmin:
            self._xmin = x
        if x > self._xmax:
            self._xmax = x
        self.histogram.counts[bin_index(M, x) - 1] += 1
        self.n_seen += 1

    def ingest_many(self, x, y) -> None:
        """Add a batch of samples.

        Produces bit-for-bit the same statistics as calling :meth:`ingest`
        on each pair in order.  The whole batch is rejected if any sample
        is invalid.
        """
        x = np.asarray(x, dtype=np.float64).ravel()
        y = np.asarray(y, dtype=np.float64).ravel()
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        if x.size == 0:
            return
        if not (np.all(x >= 0.0) and np.all(x <= 1.0)):
            bad = int(np.flatnonzero(~((x >= 0.0) & (x <= 1.0)))[0])
            raise ValueError(f"x={x[bad]!r} (batch position {bad}) is outside [0, 1]")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        M = self.basis.M
        u = x * M
        k = np.minimum(u.astype(np.int64), M - 1)
        h = local_values(u - k)
        gram = np.array(self._gram)
        rhs = np.array(self._rhs)
        # ufunc.at applies updates unbuffered and in order; indices are laid
        # out sample-major so every entry sees its additions in stream order
        for off in range(4):
            width = 4 - off
            idx = (k[:, None] + np.arange(width)).ravel()
            vals = np.stack([h[a + off] * h[a] for a in range(width)], axis=1).ravel()
            np.add.at(gram[off], idx, vals)
        idx = (k[:, None] + np.arange(4)).ravel()
        np.add.at(rhs, idx, np.stack([h[a] * y for a in range(4)], axis=1).ravel())
        ysq = np.array([self._ysq])
        np.add.at(ysq, np.zeros(y.size, dtype=np.int64), y * y)
        self._gram = gram.tolist()
        self._rhs = rhs.tolist()
        self._ysq = float(ysq[0])
        self._xmin = min(self._xmin, float(x.min()))
        self._xmax = max(self._xmax, float(x.max()))
        inc = np.bincount(bin_index_many(M, x) - 1, minlength=M)
        self.histogram.counts = [c + int(i) for c, i in zip(self.histogram.counts, inc)]
        self.n_seen += int(x.size)

    # -- statistics ------------------------------------------------------

    def _require_samples(self):
        if self.n_seen == 0:
            raise EmptyState("no samples ingested")

    @property
    def A(self) -> BandedSymMatrix:
        """Averaged Gram matrix ``(1/N) sum H_x^T H_x``."""
        self._require_samples()
        return BandedSymMatrix(np.array(self._gram) / self.n_seen)

    @property
    def b(self) -> np.ndarray:
        """Averaged right-hand side ``(1/N) sum H_x^T y``."""
        self._require_samples()
        return np.array(self._rhs) / self.n_seen

    @property
    def mean_y_squared(self) -> float:
        self._require_samples()
        return self._ysq / self.n_seen

    @property
    def x_range(self) -> tuple[float, float]:
        return self._xmin, self._xmax

    def prior_alpha(self) -> float:
        """``M sigma^2 / N + d^4``."""
        self._require_samples()
        return self.basis.M * self.sigma2 / self.n_seen + self.basis.d ** 4

    def needs_refinement(self) -> bool:
        """True once the noise term ``M sigma^2 / N`` drops below ``d^4``."""
        self._require_samples()
        return self.basis.M * self.sigma2 / self.n_seen < self.basis.d ** 4

    def system(self, alpha: float) -> tuple[BandedSymMatrix, np.ndarray]:
        return axpy_banded(self.penalty, alpha, self.A), self.b

    def fit(self, alpha: float | str = "prior") -> SplineFit:
        """Solve the regularized normal equations.

        ``alpha="prior"`` selects :meth:`prior_alpha`.
        """
        if self.n_seen < 2:
            raise DegenerateDesign(f"need at least 2 samples, have {self.n_seen}")
        if not self._xmax > self._xmin:
            raise DegenerateDesign("all observation points are identical")
        if isinstance(alpha, str):
            if alpha != "prior":
                raise ValueError(f"unknown alpha rule {alpha!r}")
            alpha = self.prior_alpha()
        alpha = float(alpha)
        if not (math.isfinite(alpha) and alpha > 0.0):
            raise ValueError(f"alpha must be positive, got {alpha!r}")
        lhs, rhs = self.system(alpha)
        return SplineFit(self.basis, cholesky_solve(lhs, rhs), alpha, self.n_seen)

    def objective(self, coeffs, alpha: float) -> float:
        """Tikhonov functional evaluated from the sufficient statistics."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        misfit = self.A.quad_form(coeffs) - 2.0 * float(coeffs @ self.b) + self.mean_y_squared
        return misfit + alpha * self.penalty.quad_form(coeffs)

    def copy(self) -> "EstimatorState":
        return restore(checkpoint(self))

    def __eq__(self, other):
        if not isinstance(other, EstimatorState):
            return NotImplemented
        return checkpoint(self) == checkpoint(other)

    def __repr__(self):
        return f"EstimatorState(M={self.M}, sigma2={self.sigma2!r}, n_seen={self.n_seen})"


def new_state(M: int, sigma2: float) -> EstimatorState:
    return EstimatorState(M, sigma2)


# -- checkpointing -----------------------------------------------------------
#
# Layout (all little-endian):
#   8s magic "SPLNDIFF" | u32 version
#   u64 M | u64 n_seen | f64 sigma2
#   f64[4 * (M+3)] Gram sums by diagonal | f64[M+3] rhs sums | u64[M] bin counts
#   f64 sum of y^2 | f64 min x | f64 max x
#   u32 CRC-32 of every preceding byte

_HEAD = struct.Struct("<8sI")
_SCALARS = struct.Struct("<QQd")
_TAIL = struct.Struct("<ddd")
_CRC = struct.Struct("<I")


def checkpoint(state: EstimatorState) -> bytes:
    parts = [
        _HEAD.pack(MAGIC, CHECKPOINT_VERSION),
        _SCALARS.pack(state.M, state.n_seen, state.sigma2),
        np.asarray(state._gram, dtype="<f8").tobytes(),
        np.asarray(state._rhs, dtype="<f8").tobytes(),
        np.asarray(state.histogram.counts, dtype="<u8").tobytes(),
        _TAIL.pack(state._ysq, state._xmin, state._xmax),
    ]
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def restore(payload: bytes) -> EstimatorState:
    payload = bytes(payload)
    if len(payload) < _HEAD.size + _SCALARS.size + _CRC.size:
        raise CorruptPayload("checkpoint is truncated")
    magic, version = _HEAD.unpack_from(payload, 0)
    if magic != MAGIC:
        raise CorruptPayload("bad magic bytes")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    body, crc = payload[:-_CRC.size], _CRC.unpack(payload[-_CRC.size:])[0]
    if zlib.crc32(body) != crc:
        raise CorruptPayload("checksum mismatch")
    M, n_seen, sigma2 = _SCALARS.unpack_from(body, _HEAD.size)
    dim = M + 3
    expected = _HEAD.size + _SCALARS.size + 8 * (5 * dim + M) + _TAIL.size
    if len(body) != expected:
        raise CorruptPayload(f"payload length {len(body)} does not match M={M}")
    pos = _HEAD.size + _SCALARS.size
    gram = np.frombuffer(body, dtype="<f8", count=4 * dim, offset=pos).reshape(4, dim)
    pos += 32 * dim
    rhs = np.frombuffer(body, dtype="<f8", count=dim, offset=pos)
    pos += 8 * dim
    counts = np.frombuffer(body, dtype="<u8", count=M, offset=pos)
    pos += 8 * M
    ysq, xmin, xmax = _TAIL.unpack_from(body, pos)
    if int(counts.sum()) != n_seen:
        raise CorruptPayload("bin counts do not add up to n_seen")

    state = EstimatorState(M, sigma2)
    state._gram = gram.astype(np.float64).tolist()
    state._rhs = rhs.astype(np.float64).tolist()
    state._ysq = ysq
    state._xmin = xmin
    state._xmax = xmax
    state.n_seen = n_seen
    state.histogram = HistogramIndicator(M, counts.tolist())
    return state
