"""Independent reference computations used to cross-check the fast paths.

Nothing here is on the streaming path: the routines materialize dense
matrices and use plain quadrature, which is only viable at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bspline import SplineBasis
from .estimator import SplineFit

MAX_ORACLE_SAMPLES = 10_000
MAX_ORACLE_M = 60


class ScaleGuardExceeded(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureGrid:
    """Composite Gauss-Legendre rule on ``[a, b]``.

    Breakpoints are the knots ``j/M`` inside the interval (if ``M`` is
    given); every piece is split into ``subdivisions`` cells carrying an
    ``order``-point rule, exact for polynomials up to degree ``2*order - 1``
    on each cell.
    """

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, a: float = 0.0, b: float = 1.0, M: int | None = None,
              subdivisions: int = 4, order: int = 5) -> "QuadratureGrid":
        if not (0.0 <= a < b <= 1.0):
            raise ValueError(f"invalid interval ({a}, {b})")
        edges = [a, b]
        if M is not None:
            inner = np.arange(1, M) / M
            edges.extend(inner[(inner > a) & (inner < b)].tolist())
        edges = np.unique(np.asarray(edges))
        pieces = np.concatenate(
            [np.linspace(lo, hi, subdivisions + 1)[:-1] for lo, hi in zip(edges[:-1], edges[1:])]
            + [edges[-1:]]
        )
        lo, hi = pieces[:-1], pieces[1:]
        nodes, w = np.polynomial.legendre.leggauss(order)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        wts = (half[:, None] * w[None, :]).ravel()
        return cls(pts, wts)

    def integrate(self, fn) -> float:
        return float(np.dot(self.weights, fn(self.points)))


def l2_norm(fn, interval=(0.0, 1.0), M: int | None = None, subdivisions: int = 4,
            order: int = 5) -> float:
    """``||fn||_{L^2(a, b)}`` by composite Gauss quadrature.

    ``fn`` must accept an array of points.  Pass ``M`` when ``fn`` is a
    spline on the ``M``-cell grid so that cells align with its knots.
    """
    a, b = interval
    grid = QuadratureGrid.build(a, b, M, subdivisions, order)
    return float(np.sqrt(max(grid.integrate(lambda x: np.asarray(fn(x)) ** 2), 0.0)))


def natural_spline_interpolate(values) -> SplineFit:
    """Natural cubic spline through ``(j/M, values[j])`` for ``j = 0..M``.

    Solved directly in the B-spline basis: ``M + 1`` interpolation rows plus
    ``s''(0) = s''(1) = 0``.
    """
    values = np.asarray(values, dtype=np.float64)
    M = values.size - 1
    if M < 2:
        raise ValueError("need at least 3 knot values")
    if not np.all(np.isfinite(values)):
        raise ValueError("knot values must be finite")
    basis = SplineBasis(M)
    n = basis.dim
    system = np.zeros((n, n))
    rhs = np.zeros(n)
    for j in range(M + 1):
        # at knot p_j only psi_{j-1}, psi_j, psi_{j+1} are nonzero
        system[j, j:j + 3] = (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0)
        rhs[j] = values[j]
    system[M + 1, 0:3] = (1.0, -2.0, 1.0)
    system[M + 2, M:M + 3] = (1.0, -2.0, 1.0)
    coeffs = np.linalg.solve(system, rhs)
    return SplineFit(basis, coeffs, alpha=0.0, n_fit=0)


def dense_penalty(basis: SplineBasis, cells_per_knot: int = 64, order: int = 4) -> np.ndarray:
    """Penalty matrix by brute-force composite quadrature of ``psi_i'' psi_j''``."""
    grid = QuadratureGrid.build(0.0, 1.0, basis.M, cells_per_knot, order)
    n = basis.dim
    D2 = np.empty((grid.points.size, n))
    eye = np.eye(n)
    for i in range(n):
        D2[:, i] = basis.evaluate_d2(eye[i], grid.points)
    return D2.T @ (grid.weights[:, None] * D2)


def dense_fit_oracle(x, y, basis: SplineBasis, alpha: float, penalty=None) -> np.ndarray:
    """Coefficients from dense assembly of ``H_N`` and the normal equations."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size > MAX_ORACLE_SAMPLES or basis.M > MAX_ORACLE_M:
        raise ScaleGuardExceeded(
            f"dense oracle limited to N <= {MAX_ORACLE_SAMPLES}, M <= {MAX_ORACLE_M}"
        )
    H = basis.design_matrix(x)
    P = dense_penalty(basis) if penalty is None else np.asarray(penalty)
    N = x.size
    lhs = alpha * P + H.T @ H / N
    rhs = H.T @ y / N
    return np.linalg.solve(lhs, rhs)


def direct_objective(coeffs, x, y, basis: SplineBasis, alpha: float) -> float:
    """Tikhonov functional by explicit summation over samples plus quadrature."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    resid = basis.evaluate(coeffs, x) - np.asarray(y, dtype=np.float64)
    rough = l2_norm(lambda t: basis.evaluate_d2(coeffs, t), M=basis.M) ** 2
    return float(np.mean(resid ** 2)) + alpha * rough
