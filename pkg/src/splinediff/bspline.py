"""Uniform cubic B-spline basis on [0, 1].

The basis has ``M + 3`` functions ``psi_j(x) = phi3((x - j/M) * M)`` for
``j = -1, ..., M + 1``.  Storage index ``j + 1`` is used for arrays, so the
function ``psi_{-1}`` lives at position 0.

Inside knot cell ``k`` (``k/M <= x <= (k+1)/M``) with local coordinate
``t = x*M - k`` only ``psi_{k-1} .. psi_{k+2}`` are nonzero and they reduce
to the four cubic pieces returned by :func:`local_values`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .banded import BandedSymMatrix

# 2-point Gauss-Legendre on [0, 1]; exact for the quadratic products psi'' * psi''.
_GAUSS2_NODES = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))
_GAUSS2_WEIGHTS = (0.5, 0.5)


def phi3(t: float) -> float:
    """Cardinal cubic B-spline with support [-2, 2]."""
    if -2.0 <= t <= -1.0:
        return (t + 2.0) ** 3 / 6.0
    if -1.0 < t <= 0.0:
        return ((t + 2.0) ** 3 - 4.0 * (t + 1.0) ** 3) / 6.0
    if 0.0 < t <= 1.0:
        return ((2.0 - t) ** 3 - 4.0 * (1.0 - t) ** 3) / 6.0
    if 1.0 < t <= 2.0:
        return (2.0 - t) ** 3 / 6.0
    return 0.0


def phi3_d1(t: float) -> float:
    """First derivative of :func:`phi3`."""
    if -2.0 <= t <= -1.0:
        return 0.5 * (t + 2.0) ** 2
    if -1.0 < t <= 0.0:
        return 0.5 * (t + 2.0) ** 2 - 2.0 * (t + 1.0) ** 2
    if 0.0 < t <= 1.0:
        return -0.5 * (2.0 - t) ** 2 + 2.0 * (1.0 - t) ** 2
    if 1.0 < t <= 2.0:
        return -0.5 * (2.0 - t) ** 2
    return 0.0


def phi3_d2(t: float) -> float:
    """Second derivative of :func:`phi3` (continuous, piecewise linear)."""
    if -2.0 <= t <= -1.0:
        return t + 2.0
    if -1.0 < t <= 0.0:
        return -3.0 * t - 2.0
    if 0.0 < t <= 1.0:
        return 3.0 * t - 2.0
    if 1.0 < t <= 2.0:
        return 2.0 - t
    return 0.0


def local_values(t):
    """Values of the four active basis functions at local coordinate ``t``.

    Works elementwise on floats or arrays.  Only ``+``, ``-`` and ``*`` are
    used so that scalar and vectorized callers round identically.
    """
    s = 1.0 - t
    t2 = t * t
    t3 = t2 * t
    return (
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    )


def local_d1(t):
    """d/dt of :func:`local_values`."""
    s = 1.0 - t
    t2 = t * t
    return (
        -0.5 * s * s,
        1.5 * t2 - 2.0 * t,
        -1.5 * t2 + t + 0.5,
        0.5 * t2,
    )


def local_d2(t):
    """d^2/dt^2 of :func:`local_values`."""
    return (1.0 - t, 3.0 * t - 2.0, 1.0 - 3.0 * t, t)


@dataclass(frozen=True)
class DesignRow:
    """Nonzero window of ``H_x`` (or its derivative) at one point.

    ``start_index`` is the basis index ``j`` of ``values[0]``; the window
    covers ``j = start_index, ..., start_index + 3``.
    """

    start_index: int
    values: tuple[float, float, float, float]

    @property
    def storage_start(self) -> int:
        return self.start_index + 1

    def nonzero(self) -> dict[int, float]:
        return {self.start_index + a: v for a, v in enumerate(self.values) if v != 0.0}

    def dot(self, coeffs) -> float:
        s = self.storage_start
        return sum(v * float(coeffs[s + a]) for a, v in enumerate(self.values))

    def dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        s = self.storage_start
        out[s:s + 4] = self.values
        return out


@dataclass(frozen=True)
class SplineBasis:
    """Cubic B-spline basis with ``M`` equal cells on [0, 1]."""

    M: int

    def __post_init__(self):
        if isinstance(self.M, bool) or not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def d(self) -> float:
        return 1.0 / self.M

    @property
    def dim(self) -> int:
        return self.M + 3

    def knot(self, j: int) -> float:
        return j * self.d

    def knots(self) -> np.ndarray:
        """Knots ``p_{-1} .. p_{M+1}``, aligned with basis storage order."""
        return np.arange(-1, self.M + 2) * self.d

    def locate(self, x: float) -> tuple[int, float]:
        """Cell index ``k`` in ``0..M-1`` and local coordinate ``t`` in [0, 1]."""
        x = _check_domain(x)
        u = x * self.M
        k = min(int(u), self.M - 1)
        return k, u - k

    def locate_many(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.size and not (np.all(x >= 0.0) and np.all(x <= 1.0)):
            raise ValueError("observation points must lie in [0, 1]")
        u = x * self.M
        k = np.minimum(u.astype(np.int64), self.M - 1)
        return k, u - k

    def design_row(self, x: float) -> DesignRow:
        k, t = self.locate(x)
        return DesignRow(k - 1, local_values(t))

    def derivative_row(self, x: float) -> DesignRow:
        k, t = self.locate(x)
        m = float(self.M)
        return DesignRow(k - 1, tuple(m * v for v in local_d1(t)))

    def second_derivative_row(self, x: float) -> DesignRow:
        k, t = self.locate(x)
        m2 = float(self.M) ** 2
        return DesignRow(k - 1, tuple(m2 * v for v in local_d2(t)))

    def _evaluate(self, coeffs, x, pieces, scale):
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} coefficients, got shape {coeffs.shape}")
        k, t = self.locate_many(x)
        vals = pieces(t)
        out = np.zeros_like(t)
        for a in range(4):
            out += coeffs[k + a] * vals[a]
        return out * scale

    def evaluate(self, coeffs, x) -> np.ndarray:
        """``sum_j coeffs[j] * psi_j(x)`` for an array of points."""
        return self._evaluate(coeffs, x, local_values, 1.0)

    def evaluate_d1(self, coeffs, x) -> np.ndarray:
        return self._evaluate(coeffs, x, local_d1, float(self.M))

    def evaluate_d2(self, coeffs, x) -> np.ndarray:
        return self._evaluate(coeffs, x, local_d2, float(self.M) ** 2)

    def design_matrix(self, x) -> np.ndarray:
        """Dense ``len(x) x (M+3)`` matrix of basis values.  Small inputs only."""
        k, t = self.locate_many(x)
        vals = local_values(t)
        H = np.zeros((k.size, self.dim))
        rows = np.arange(k.size)
        for a in range(4):
            H[rows, k + a] = vals[a]
        return H


def _check_domain(x) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x!r} is outside [0, 1]")
    return x


def penalty_matrix(basis: SplineBasis) -> BandedSymMatrix:
    """Gram matrix ``P_ij = int_0^1 psi_i'' psi_j'' dx`` in banded storage.

    Each knot cell contributes a 4x4 block; on a cell ``psi''`` is linear in
    ``t`` so 2-point Gauss-Legendre integrates the products exactly.
    """
    local = np.zeros((4, 4))
    for node, weight in zip(_GAUSS2_NODES, _GAUSS2_WEIGHTS):
        g = np.array(local_d2(node))
        local += weight * np.outer(g, g)
    # dx = d dt and each psi'' carries a factor 1/d^2
    local *= float(basis.M) ** 3

    diags = np.zeros((4, basis.dim))
    for k in range(basis.M):
        for a in range(4):
            for b in range(a + 1):
                diags[a - b, k + b] += local[a, b]
    return BandedSymMatrix(diags)
