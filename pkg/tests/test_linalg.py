import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecocast.linalg import (
    EXACT_SVD,
    InverseConfig,
    finite_difference,
    pseudo_inverse,
    solve_ridge,
    spectral_radius,
    tikhonov,
    truncated,
)


def random_matrix(rng, rows, cols, rank=None):
    if rank is None:
        return rng.standard_normal((rows, cols))
    left = rng.standard_normal((rows, rank))
    right = rng.standard_normal((rank, cols))
    return left @ right


def penrose_residuals(a, a_pinv):
    aa = a @ a_pinv
    pa = a_pinv @ a
    return (
        np.linalg.norm(a @ pa - a) / max(np.linalg.norm(a), 1e-300),
        np.linalg.norm(a_pinv @ aa - a_pinv) / max(np.linalg.norm(a_pinv), 1e-300),
        np.linalg.norm(aa - aa.T) / max(np.linalg.norm(aa), 1e-300),
        np.linalg.norm(pa - pa.T) / max(np.linalg.norm(pa), 1e-300),
    )


class TestPseudoInverse:
    def test_identity(self):
        assert np.allclose(pseudo_inverse(np.eye(3)), np.eye(3), atol=1e-14)

    def test_singular_diagonal(self):
        got = pseudo_inverse(np.diag([2.0, 0.0]))
        assert np.allclose(got, np.diag([0.5, 0.0]), atol=1e-14)

    def test_scalar_tikhonov(self):
        # 1x1 ridge inverse: u / (u^2 + lam) = 1 / 2
        got = pseudo_inverse(np.array([[1.0]]), tikhonov(1.0))
        assert got == pytest.approx(0.5, abs=1e-15)

    def test_penrose_identities_random(self):
        rng = np.random.default_rng(3)
        for trial in range(40):
            rows = int(rng.integers(1, 51))
            cols = int(rng.integers(1, 31))
            rank = None if trial % 2 == 0 else int(rng.integers(1, min(rows, cols) + 1))
            a = random_matrix(rng, rows, cols, rank)
            residuals = penrose_residuals(a, pseudo_inverse(a, EXACT_SVD))
            assert max(residuals) < 1e-8

    def test_tikhonov_matches_normal_equations(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((12, 5))
        lam = 0.3
        oracle = np.linalg.inv(a.T @ a + lam * np.eye(5)) @ a.T
        got = pseudo_inverse(a, tikhonov(lam))
        assert np.linalg.norm(got - oracle) / np.linalg.norm(oracle) < 1e-12

    def test_tikhonov_lam_zero_rank_deficient_falls_back(self):
        rng = np.random.default_rng(11)
        a = random_matrix(rng, 8, 6, rank=3)
        got = pseudo_inverse(a, tikhonov(0.0))
        assert max(penrose_residuals(a, got)) < 1e-8

    def test_tikhonov_continuity(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((20, 8))
        exact = pseudo_inverse(a, EXACT_SVD)
        gaps = [
            np.linalg.norm(pseudo_inverse(a, tikhonov(lam)) - exact)
            for lam in (1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8)
        ]
        assert all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-6 * np.linalg.norm(exact)

    def test_truncated_rank(self):
        a = np.diag([4.0, 2.0, 1.0])
        got = pseudo_inverse(a, truncated(2))
        assert np.allclose(got, np.diag([0.25, 0.5, 0.0]), atol=1e-14)

    def test_truncated_threshold_relative(self):
        a = np.diag([4.0, 2.0, 1.0])
        got = pseudo_inverse(a, truncated(0.3))  # keeps sigma >= 1.2
        assert np.allclose(got, np.diag([0.25, 0.5, 0.0]), atol=1e-14)

    def test_truncated_rank_too_large(self):
        with pytest.raises(ValueError):
            pseudo_inverse(np.eye(2), truncated(3))

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            pseudo_inverse(np.empty((0, 3)))
        with pytest.raises(ValueError):
            pseudo_inverse(np.array([[1.0, np.nan]]))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            InverseConfig(mode="nope")
        with pytest.raises(ValueError):
            InverseConfig(mode="truncated-svd")
        with pytest.raises(ValueError):
            InverseConfig(mode="truncated-svd", rank_or_threshold=0)
        with pytest.raises(ValueError):
            InverseConfig(mode="tikhonov", lam=-1.0)
        with pytest.raises(ValueError):
            InverseConfig(mode="tikhonov")


class TestSolveRidge:
    def test_identity_design(self):
        d = np.arange(12.0).reshape(4, 3)
        assert np.allclose(solve_ridge(np.eye(4), d, 0.0), d, atol=1e-12)

    def test_large_lam_shrinks_monotonically(self):
        rng = np.random.default_rng(2)
        u = rng.standard_normal((30, 6))
        d = rng.standard_normal((30, 2))
        norms = [np.linalg.norm(solve_ridge(u, d, lam)) for lam in (1e2, 1e4, 1e6, 1e8)]
        assert all(n1 > n2 for n1, n2 in zip(norms, norms[1:]))
        assert norms[-1] < 1e-5

    def test_matches_dense_normal_equations_oracle(self):
        rng = np.random.default_rng(42)
        u = rng.standard_normal((50, 8))
        d = rng.standard_normal((50, 3))
        lam = 0.1
        oracle = np.linalg.solve(u.T @ u + lam * np.eye(8), u.T @ d)
        got = solve_ridge(u, d, lam)
        assert np.linalg.norm(got - oracle) / np.linalg.norm(oracle) < 1e-8

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            solve_ridge(np.eye(4), np.ones(3), 0.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            solve_ridge(np.eye(2), np.array([np.inf, 1.0]), 0.0)


class TestSpectralRadius:
    def test_diagonal(self):
        est = spectral_radius(np.diag([0.5, -0.9]), tol=1e-10)
        assert est.converged
        assert est.radius == pytest.approx(0.9, abs=1e-9)

    def test_identity(self):
        est = spectral_radius(np.eye(4))
        assert est.converged and est.radius == pytest.approx(1.0, abs=1e-9)

    def test_random_matches_dense_eigenvalue_oracle(self):
        rng = np.random.default_rng(8)
        for trial in range(20):
            m = rng.standard_normal((10, 10))
            oracle = float(np.max(np.abs(np.linalg.eigvals(m))))
            est = spectral_radius(m, tol=1e-10, max_iter=2000, seed=trial)
            assert est.converged
            assert abs(est.radius - oracle) < 1e-6 * max(oracle, 1.0)

    def test_zero_matrix(self):
        assert spectral_radius(np.zeros((3, 3))).radius == 0.0

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            spectral_radius(np.ones((2, 3)))


class TestFiniteDifference:
    def test_linear_series_gives_exact_slope(self):
        t = np.linspace(0.0, 3.0, 31)
        out = finite_difference(t, t[1] - t[0])
        assert np.allclose(out, 1.0, atol=1e-12)

    def test_constant_series_gives_zeros(self):
        out = finite_difference(np.full(10, 4.2), 0.5)
        assert np.all(out == 0.0)

    def test_sine_against_analytic_derivative(self):
        dt = 1e-3
        t = np.arange(0.0, 1.0 + dt, dt)
        out = finite_difference(np.sin(t), dt)
        assert np.max(np.abs(out - np.cos(t[:-1]))) <= 1e-3

    def test_output_length(self):
        assert finite_difference(np.arange(5.0), 1.0).shape == (4,)

    @given(
        st.integers(2, 20),
        st.floats(-3.0, 3.0, allow_nan=False),
        st.floats(-3.0, 3.0, allow_nan=False),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_linearity(self, n, a, b, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        dt = 0.25
        lhs = finite_difference(a * x + b * y, dt)
        rhs = a * finite_difference(x, dt) + b * finite_difference(y, dt)
        assert np.allclose(lhs, rhs, atol=1e-9, rtol=1e-9)

    def test_too_short_and_bad_dt(self):
        with pytest.raises(ValueError):
            finite_difference(np.array([1.0]), 0.1)
        with pytest.raises(ValueError):
            finite_difference(np.arange(3.0), 0.0)
