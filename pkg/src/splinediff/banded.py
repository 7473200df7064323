"""Symmetric band matrices stored by lower diagonals, and a banded Cholesky solve."""

from __future__ import annotations

import math

import numpy as np

PIVOT_FLOOR = 1e-300


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not safely positive."""


class BandedSymMatrix:
    """Symmetric matrix with ``A[i, j] = 0`` whenever ``|i - j| > bandwidth``.

    Parameters
    ----------
    diagonals : array_like, shape (bandwidth + 1, n)
        Row ``k`` holds the k-th lower diagonal: ``diagonals[k, i] = A[i + k, i]``.
        The trailing ``k`` entries of row ``k`` are padding and are forced to zero.
    """

    __slots__ = ("_diags",)

    def __init__(self, diagonals):
        diags = np.array(diagonals, dtype=np.float64, copy=True)
        if diags.ndim != 2 or diags.shape[0] < 1:
            raise ValueError("diagonals must be a 2-D array of shape (bandwidth + 1, n)")
        n = diags.shape[1]
        for k in range(1, diags.shape[0]):
            diags[k, max(n - k, 0):] = 0.0
        diags.setflags(write=False)
        self._diags = diags

    @property
    def n(self) -> int:
        return self._diags.shape[1]

    @property
    def bandwidth(self) -> int:
        return self._diags.shape[0] - 1

    @property
    def diagonals(self) -> np.ndarray:
        return self._diags

    @classmethod
    def zeros(cls, n: int, bandwidth: int) -> "BandedSymMatrix":
        return cls(np.zeros((bandwidth + 1, n)))

    @classmethod
    def identity(cls, n: int) -> "BandedSymMatrix":
        return cls(np.ones((1, n)))

    @classmethod
    def from_dense(cls, dense, bandwidth: int) -> "BandedSymMatrix":
        """Take the lower band of ``dense``; entries outside the band are ignored."""
        dense = np.asarray(dense, dtype=np.float64)
        n = dense.shape[0]
        diags = np.zeros((bandwidth + 1, n))
        for k in range(min(bandwidth, n - 1) + 1):
            diags[k, : n - k] = np.diagonal(dense, -k)
        return cls(diags)

    def __getitem__(self, ij) -> float:
        i, j = ij
        if i < j:
            i, j = j, i
        k = i - j
        if k > self.bandwidth:
            return 0.0
        return float(self._diags[k, j])

    def to_dense(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n, n))
        for k in range(min(self.bandwidth, n - 1) + 1):
            idx = np.arange(n - k)
            out[idx + k, idx] = self._diags[k, : n - k]
            out[idx, idx + k] = self._diags[k, : n - k]
        return out

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        n = self.n
        if x.shape != (n,):
            raise ValueError(f"vector of length {n} expected, got shape {x.shape}")
        y = self._diags[0] * x
        for k in range(1, min(self.bandwidth, n - 1) + 1):
            band = self._diags[k, : n - k]
            y[k:] += band * x[: n - k]
            y[: n - k] += band * x[k:]
        return y

    def quad_form(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(x @ self.matvec(x))

    def norm_inf(self) -> float:
        return float(np.abs(self.to_dense()).sum(axis=1).max()) if self.n else 0.0

    def __eq__(self, other):
        if not isinstance(other, BandedSymMatrix):
            return NotImplemented
        return self._diags.shape == other._diags.shape and np.array_equal(self._diags, other._diags)

    def __repr__(self):
        return f"BandedSymMatrix(n={self.n}, bandwidth={self.bandwidth})"


def axpy_banded(A: BandedSymMatrix, alpha: float, B: BandedSymMatrix) -> BandedSymMatrix:
    """Return ``alpha * A + B`` with bandwidth ``max(A.bandwidth, B.bandwidth)``."""
    if A.n != B.n:
        raise ValueError(f"dimension mismatch: {A.n} vs {B.n}")
    bw = max(A.bandwidth, B.bandwidth)
    out = np.zeros((bw + 1, A.n))
    out[: B.bandwidth + 1] = B.diagonals
    out[: A.bandwidth + 1] += alpha * A.diagonals
    return BandedSymMatrix(out)


def cholesky_banded(A: BandedSymMatrix) -> list[list[float]]:
    """Lower Cholesky factor of ``A`` in the same diagonal layout.

    Returns a list of ``bandwidth + 1`` lists with ``L[k][j] = L_{j+k, j}``.
    Cost is ``O(n * bandwidth**2)``.
    """
    n, bw = A.n, A.bandwidth
    a = A.diagonals.tolist()
    L = [[0.0] * n for _ in range(bw + 1)]
    L0 = L[0]
    for j in range(n):
        s = a[0][j]
        for k in range(1, min(bw, j) + 1):
            v = L[k][j - k]
            s -= v * v
        if not s > PIVOT_FLOOR:
            raise NotPositiveDefinite(f"non-positive pivot {s!r} at row {j}")
        ljj = math.sqrt(s)
        L0[j] = ljj
        for k in range(1, min(bw, n - 1 - j) + 1):
            i = j + k
            # A[i, j] minus sum over shared columns c < j of L[i, c] L[j, c]
            s = a[k][j]
            for m in range(1, bw - k + 1):
                c = j - m
                if c < 0:
                    break
                s -= L[k + m][c] * L[m][c]
            L[k][j] = s / ljj
    return L


def cholesky_solve(A: BandedSymMatrix, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite banded ``A``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot ``<= 1e-300`` appears during factorization.
    """
    rhs = np.asarray(b, dtype=np.float64)
    n, bw = A.n, A.bandwidth
    if rhs.shape != (n,):
        raise ValueError(f"right-hand side of length {n} expected, got shape {rhs.shape}")
    L = cholesky_banded(A)
    L0 = L[0]
    z = rhs.tolist()
    for i in range(n):
        s = z[i]
        for k in range(1, min(bw, i) + 1):
            s -= L[k][i - k] * z[i - k]
        z[i] = s / L0[i]
    for i in range(n - 1, -1, -1):
        s = z[i]
        for k in range(1, min(bw, n - 1 - i) + 1):
            s -= L[k][i] * z[i + k]
        z[i] = s / L0[i]
    return np.array(z)
