import time

import numpy as np
import pytest

from splinediff.banded import (
    BandedSymMatrix,
    NotPositiveDefinite,
    axpy_banded,
    cholesky_solve,
)


def random_spd_banded(rng, n, bw=3):
    """``L L^T`` for a random lower-banded ``L`` with positive diagonal.

    Off-diagonals are kept small so ``L`` stays well conditioned; random
    triangular factors are otherwise exponentially ill-conditioned in ``n``.
    """
    L = np.zeros((n, n))
    for k in range(min(bw, n - 1) + 1):
        idx = np.arange(n - k)
        L[idx + k, idx] = rng.uniform(1.0, 2.0, n - k) if k == 0 else rng.uniform(-0.3, 0.3, n - k)
    A = L @ L.T
    return BandedSymMatrix.from_dense(A, bw), A


def random_banded(rng, n, bw):
    return BandedSymMatrix(rng.normal(size=(bw + 1, n)))


def test_dense_round_trip(rng):
    B = random_banded(rng, 9, 3)
    D = B.to_dense()
    assert np.array_equal(D, D.T)
    assert BandedSymMatrix.from_dense(D, 3) == B
    assert B[2, 5] == D[2, 5] == B[5, 2]
    assert B[0, 6] == 0.0


def test_matvec(rng):
    B = random_banded(rng, 17, 3)
    x = rng.normal(size=17)
    np.testing.assert_allclose(B.matvec(x), B.to_dense() @ x, rtol=1e-14, atol=1e-14)


def test_axpy_zero_and_identity(rng):
    A, B = random_banded(rng, 10, 3), random_banded(rng, 10, 3)
    assert axpy_banded(A, 0.0, B) == B
    assert axpy_banded(A, 1.0, BandedSymMatrix.zeros(10, 3)) == A


def test_axpy_vs_dense(rng):
    A, B = random_banded(rng, 10, 3), random_banded(rng, 10, 3)
    alpha = 0.37
    out = axpy_banded(A, alpha, B).to_dense()
    np.testing.assert_allclose(out, alpha * A.to_dense() + B.to_dense(), atol=1e-15, rtol=0)


def test_axpy_mixed_bandwidth(rng):
    A, B = random_banded(rng, 8, 1), random_banded(rng, 8, 3)
    out = axpy_banded(A, 2.0, B)
    assert out.bandwidth == 3
    np.testing.assert_allclose(out.to_dense(), 2.0 * A.to_dense() + B.to_dense(), atol=1e-15)


def test_axpy_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        axpy_banded(random_banded(rng, 5, 3), 1.0, random_banded(rng, 6, 3))


def test_solve_identity(rng):
    b = rng.normal(size=7)
    np.testing.assert_array_equal(cholesky_solve(BandedSymMatrix.identity(7), b), b)


def test_solve_two_by_two():
    A = BandedSymMatrix.from_dense([[2.0, 1.0], [1.0, 2.0]], 1)
    np.testing.assert_allclose(cholesky_solve(A, [3.0, 3.0]), [1.0, 1.0], rtol=1e-15)


def test_solve_vs_dense(rng):
    A, D = random_spd_banded(rng, 50)
    b = rng.normal(size=50)
    x = cholesky_solve(A, b)
    ref = np.linalg.solve(D, b)
    assert np.linalg.norm(x - ref) / np.linalg.norm(ref) <= 1e-10
    resid = np.linalg.norm(A.matvec(x) - b)
    assert resid <= 1e-10 * (np.linalg.norm(D, 2) * np.linalg.norm(x) + np.linalg.norm(b))


def test_round_trip_many(rng):
    for _ in range(100):
        n = int(rng.integers(1, 60))
        A, _ = random_spd_banded(rng, n)
        x = rng.normal(size=n)
        back = cholesky_solve(A, A.matvec(x))
        assert np.linalg.norm(back - x) <= 1e-9 * np.linalg.norm(x)


def test_small_dimensions_with_wide_band(rng):
    for n in (1, 2, 3):
        A, D = random_spd_banded(rng, n)
        b = rng.normal(size=n)
        np.testing.assert_allclose(cholesky_solve(A, b), np.linalg.solve(D, b), rtol=1e-10)


def test_not_positive_definite():
    A = BandedSymMatrix.from_dense([[1.0, 2.0], [2.0, 1.0]], 1)
    with pytest.raises(NotPositiveDefinite):
        cholesky_solve(A, [1.0, 1.0])
    with pytest.raises(NotPositiveDefinite):
        cholesky_solve(BandedSymMatrix.zeros(4, 3), np.ones(4))


def test_solve_scales_linearly(rng):
    def best(n):
        A, _ = random_spd_banded(rng, n)
        b = rng.normal(size=n)
        times = []
        for _ in range(5):
            t0 = time.perf_counter()
            cholesky_solve(A, b)
            times.append(time.perf_counter() - t0)
        return min(times)

    assert best(4000) / best(2000) <= 3.5
