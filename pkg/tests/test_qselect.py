import numpy as np
import pytest

from arlq.cml import SolverControl, cml_fit
from arlq.cmlq import ira_fit
from arlq.exceptions import DomainError, SingularityError
from arlq.model import Dataset, ParameterVector
from arlq.qselect import DEFAULT_GRID, raic, select_q

from conftest import simulate_instance


def test_default_grid():
    assert DEFAULT_GRID[0] == 0.30 and DEFAULT_GRID[-1] == 1.00
    assert DEFAULT_GRID.size == 71


def test_raic_matches_cml_at_q1(small_instance):
    res = select_q(small_instance, 2, [1.0])
    assert res.q_star == 1.0
    assert res.raic_star == pytest.approx(raic(cml_fit(small_instance, 2), small_instance),
                                          rel=1e-12)


def test_raic_classical_penalty_near_param_count(rng):
    # under a correct model tr(-M2^-1 M1) estimates the number of parameters
    d = simulate_instance(rng, 4000, [1.0, 2.0], [0.5])
    fit = cml_fit(d, 1)
    penalty = raic(fit, d) + fit.loglik / (d.n_obs - 1)
    assert penalty == pytest.approx(4.0, rel=0.15)


def test_raic_singular_m2(rng):
    x = rng.standard_normal(30)
    d = Dataset(rng.standard_normal(30), np.column_stack([x, x]))
    fit = cml_fit(Dataset(rng.standard_normal(30), x[:, None]), 1)
    fit.params = ParameterVector([0.5, 0.5], fit.params.phi, fit.params.sigma2)
    with pytest.raises(SingularityError):
        raic(fit, d)


def test_curve_sorted_and_argmin(small_instance):
    grid = [0.7, 0.8, 0.9, 1.0]
    res = select_q(small_instance, 2, grid)
    qs = [q for q, _ in res.raic_curve]
    assert qs == sorted(qs)
    assert set(qs) | set(res.failures) == set(grid)
    best = min(v for _, v in res.raic_curve)
    assert res.raic_star == best
    assert res.fit_at_q_star.q == res.q_star


def test_curve_point_is_a_fresh_fit(small_instance):
    res = select_q(small_instance, 2, [0.85, 0.9, 0.95, 1.0])
    curve = dict(res.raic_curve)
    fresh = ira_fit(small_instance, 2, 0.9)
    assert curve[0.9] == pytest.approx(raic(fresh, small_instance), rel=1e-6)


def test_deterministic(small_instance):
    a = select_q(small_instance, 2, np.linspace(0.6, 1.0, 9))
    b = select_q(small_instance, 2, np.linspace(0.6, 1.0, 9))
    assert a.raic_curve == b.raic_curve and a.q_star == b.q_star


def test_tie_goes_to_larger_q(small_instance, monkeypatch):
    import arlq.qselect as qs
    monkeypatch.setattr(qs, "raic", lambda fit, data: 1.0)
    res = qs.select_q(small_instance, 2, [0.8, 0.9, 0.95])
    assert res.q_star == 0.95


def test_collapsed_points_skipped(monkeypatch, small_instance):
    import arlq.qselect as qs
    real = qs.ira_fit

    def fake(data, p, q, control=None, start=None):
        fit = real(data, p, q, control, start)
        if q < 0.9:
            fit.degenerate = True
        return fit

    monkeypatch.setattr(qs, "ira_fit", fake)
    res = qs.select_q(small_instance, 2, [0.8, 0.85, 0.9, 1.0])
    assert sorted(res.failures) == [0.8, 0.85]
    assert all("collapsed" in why for why in res.failures.values())


@pytest.mark.parametrize("grid", [[], [0.0, 0.5], [0.5, 1.5]])
def test_bad_grid(small_instance, grid):
    with pytest.raises(DomainError):
        select_q(small_instance, 2, grid)


@pytest.mark.parametrize("step", ["weighted_mean", "scaled"])
def test_clean_data_prefers_q_near_one(step):
    # simulation design: N=50, five covariates, AR(2) errors
    rng = np.random.default_rng(2024)
    control = SolverControl(variance_step=step)
    picks = []
    for _ in range(20):
        d = simulate_instance(rng, 50, [1.0, 3.0, 5.0, 2.0, 1.0], [0.8, -0.2])
        picks.append(select_q(d, 2, control=control).q_star)
    assert np.median(picks) >= 0.95, np.median(picks)


def test_outliers_push_q_down():
    rng = np.random.default_rng(31)
    d = simulate_instance(rng, 50, [1.0, 3.0, 5.0, 2.0, 1.0], [0.8, -0.2])
    y = d.y.copy()
    y[rng.choice(50, 5, replace=False)] = rng.normal(10, 1, 5)
    res = select_q(Dataset(y, d.X), 2)
    assert res.q_star < 0.95
