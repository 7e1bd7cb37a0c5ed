import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from arlq import CMLqRegression, CMLRegression, cml_fit, ira_fit
from arlq.model import Dataset

from conftest import simulate_instance


@pytest.fixture
def xy(rng):
    d = simulate_instance(rng, 60, [2.0, -1.0, 0.5], [0.6])
    return d.X, d.y


def test_params_and_clone():
    est = CMLqRegression(ar_order=2, q=0.8, max_iter=50)
    params = est.get_params()
    assert params["ar_order"] == 2 and params["q"] == 0.8 and params["max_iter"] == 50
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(q="auto")
    assert est.q == "auto"


def test_cml_estimator_matches_function(xy):
    X, y = xy
    est = CMLRegression(ar_order=1).fit(X, y)
    fit = cml_fit(Dataset(y, np.column_stack([np.ones(len(y)), X])), 1)
    assert est.intercept_ == fit.params.beta[0]
    np.testing.assert_array_equal(est.coef_, fit.params.beta[1:])
    np.testing.assert_array_equal(est.phi_, fit.params.phi)
    assert est.q_ == 1.0 and est.converged_ and est.n_features_in_ == 3


def test_fixed_q_and_no_intercept(xy):
    X, y = xy
    est = CMLqRegression(ar_order=1, q=0.7, fit_intercept=False).fit(X, y)
    fit = ira_fit(Dataset(y, X), 1, 0.7)
    np.testing.assert_array_equal(est.coef_, fit.params.beta)
    assert est.intercept_ == 0.0
    assert est.weights_.shape == (len(y) - 1,)
    assert est.sigma2_corrected_ == pytest.approx(est.sigma2_ / 0.7)


def test_auto_q(xy):
    X, y = xy
    est = CMLqRegression(ar_order=1, grid=[0.8, 0.9, 1.0]).fit(X, y)
    assert est.q_ in (0.8, 0.9, 1.0)
    assert dict(est.raic_curve_)[est.q_] == pytest.approx(est.raic_)


def test_predict_and_score(xy):
    X, y = xy
    est = CMLRegression(ar_order=1).fit(X, y)
    np.testing.assert_allclose(est.predict(X), X @ est.coef_ + est.intercept_)
    assert est.score(X, y) > 0.5
    with pytest.raises(ValueError):
        est.predict(X[:, :2])


def test_inference_report(xy):
    X, y = xy
    rep = CMLqRegression(ar_order=1, q=0.9).fit(X, y).inference(0.9)
    assert rep.level == 0.9 and rep.se.shape == (6,)


def test_unfitted_and_bad_q(xy):
    X, y = xy
    with pytest.raises(NotFittedError):
        CMLRegression().predict(X)
    with pytest.raises(ValueError):
        CMLqRegression(q="best").fit(X, y)
