import numpy as np
import pytest

from arlq.cml import (
    SolverControl,
    cml_beta_update,
    cml_fit,
    cml_phi_update,
    cml_sigma_update,
    initial_params,
)
from arlq.exceptions import DimensionError, DomainError, SingularityError
from arlq.model import Dataset, backshift_transform, score

from conftest import simulate_instance


def _ones(n):
    return np.ones((n, 1))


class TestBetaUpdate:
    def test_constant_column_by_hand(self):
        d = Dataset([1, 2, 3, 4], _ones(4))
        np.testing.assert_allclose(cml_beta_update(d, [0.5]), [4.0], rtol=1e-12)

    def test_phi_zero_is_ols(self, rng):
        X = rng.standard_normal((10, 2))
        y = rng.standard_normal(10)
        d = Dataset(y, X)
        oracle = np.linalg.solve(X.T @ X, X.T @ y)
        np.testing.assert_allclose(cml_beta_update(d, []), oracle, atol=1e-10)

    def test_exact_fit_recovers_beta(self, rng):
        X = rng.standard_normal((30, 3))
        b = np.array([1.0, -2.0, 0.25])
        d = Dataset(X @ b, X)
        np.testing.assert_allclose(cml_beta_update(d, [0.6, -0.3]), b, atol=1e-12)

    def test_rank_deficient_raises(self, rng):
        x = rng.standard_normal(20)
        d = Dataset(rng.standard_normal(20), np.column_stack([x, 2 * x]))
        with pytest.raises(SingularityError) as info:
            cml_beta_update(d, [0.3])
        assert info.value.condition_number > 1e10


class TestPhiUpdate:
    def test_ar1_by_hand(self):
        d = Dataset([1, 2, 3, 4], _ones(4))
        np.testing.assert_allclose(cml_phi_update(d, [0.0], 1), [20 / 14], rtol=1e-12)

    def test_zero_cross_products(self):
        # only e_1 is nonzero: R > 0 but R0 = 0
        d = Dataset([1, 0, 0, 0], _ones(4))
        np.testing.assert_allclose(cml_phi_update(d, [0.0], 1), [0.0], atol=1e-15)

    def test_singular_r(self):
        d = Dataset([0, 0, 0, 0, 1], _ones(5))
        with pytest.raises(SingularityError):
            cml_phi_update(d, [0.0], 1)

    def test_consistency_long_ar1(self, rng):
        d = simulate_instance(rng, 2000, [0.0], [0.8])
        phi = cml_phi_update(d, [0.0], 1)
        assert abs(phi[0] - 0.8) < 0.1


class TestSigmaUpdate:
    def test_by_hand(self):
        d = Dataset([1, 2, 3, 4], _ones(4))
        assert cml_sigma_update(d, [2.0], [0.5]) == pytest.approx(3.5 / 3, rel=1e-12)

    def test_constant_innovation(self):
        # y_t - 0.5 y_{t-1} = 1.5 for every t
        y = [1.0]
        for _ in range(5):
            y.append(1.5 + 0.5 * y[-1])
        d = Dataset(y, _ones(6))
        assert cml_sigma_update(d, [0.0], [0.5]) == pytest.approx(2.25, rel=1e-12)

    def test_exact_fit_zero(self, rng):
        X = rng.standard_normal((12, 2))
        d = Dataset(X @ [1.0, 2.0], X)
        assert cml_sigma_update(d, [1.0, 2.0], [0.3]) == pytest.approx(0.0, abs=1e-25)


class TestCmlFit:
    def test_p0_matches_normal_equations(self, rng):
        for _ in range(5):
            n, m = rng.integers(15, 60), rng.integers(1, 5)
            X = rng.standard_normal((n, m))
            y = rng.standard_normal(n)
            fit = cml_fit(Dataset(y, X), 0)
            oracle = np.linalg.solve(X.T @ X, X.T @ y)
            np.testing.assert_allclose(fit.params.beta, oracle, atol=1e-10)
            resid = y - X @ oracle
            assert fit.params.sigma2 == pytest.approx(resid @ resid / n, rel=1e-10)
            assert fit.converged

    def test_large_sample_consistency(self, rng):
        d = simulate_instance(rng, 2000, [1.0, 3.0], [0.8, -0.2])
        fit = cml_fit(d, 2)
        assert fit.converged and fit.stationary
        np.testing.assert_allclose(fit.params.beta, [1.0, 3.0], atol=0.1)
        np.testing.assert_allclose(fit.params.phi, [0.8, -0.2], atol=0.07)
        assert abs(fit.params.sigma - 1.0) < 0.05

    def test_fixed_point(self, small_instance):
        eps = 1e-10
        fit = cml_fit(small_instance, 2, SolverControl(epsilon=eps))
        b, phi = fit.params.beta, fit.params.phi
        assert np.max(np.abs(cml_phi_update(small_instance, b, 2) - phi)) < 10 * eps
        assert np.max(np.abs(cml_beta_update(small_instance, phi) - b)) < 10 * eps
        assert abs(cml_sigma_update(small_instance, b, phi) - fit.params.sigma2) < 10 * eps

    def test_score_vanishes(self, small_instance):
        fit = cml_fit(small_instance, 2, SolverControl(epsilon=1e-11))
        assert np.max(np.abs(score(small_instance, fit.params))) < 1e-6

    def test_beta_orthogonality(self, small_instance):
        fit = cml_fit(small_instance, 2)
        t = backshift_transform(small_instance, fit.params.phi)
        r = t.ty - t.tX @ fit.params.beta
        assert np.max(np.abs(t.tX.T @ r)) < 1e-8 * np.linalg.norm(t.ty)

    def test_non_convergence_is_reported(self, small_instance):
        fit = cml_fit(small_instance, 2, SolverControl(epsilon=1e-15, max_iterations=2))
        assert not fit.converged
        assert fit.iterations == 2

    def test_trace_records_iterates(self, small_instance):
        fit = cml_fit(small_instance, 2, SolverControl(trace=True))
        assert len(fit.trace) == fit.iterations + 1
        start = initial_params(small_instance, 2)
        np.testing.assert_array_equal(fit.trace[0].beta, start.beta)
        np.testing.assert_array_equal(fit.trace[-1].phi, fit.params.phi)

    def test_exact_fit_flagged_degenerate(self, rng):
        X = rng.standard_normal((20, 2))
        fit = cml_fit(Dataset(X @ [1.0, -1.0], X), 1)
        assert fit.degenerate
        np.testing.assert_allclose(fit.params.beta, [1.0, -1.0], atol=1e-10)

    def test_too_short_series(self, rng):
        d = Dataset(rng.standard_normal(5), rng.standard_normal((5, 2)))
        with pytest.raises(DimensionError):
            cml_fit(d, 3)

    def test_bad_control(self):
        with pytest.raises(DomainError):
            SolverControl(epsilon=0.0)
        with pytest.raises(DomainError):
            SolverControl(max_iterations=0)
