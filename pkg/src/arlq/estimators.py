"""scikit-learn style estimators wrapping the CML and CMLq fits.

Rows of ``X`` and ``y`` must be in time order.  ``predict`` returns the
regression mean ``X @ coef_ + intercept_``; the AR error part is not
forecast.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .cml import SolverControl, cml_fit
from .cmlq import ira_fit
from .exceptions import ArlqError
from .inference import asymptotic_report
from .model import Dataset
from .qselect import raic, select_q


class _ARErrorBase(RegressorMixin, BaseEstimator):

    def _dataset(self, X, y) -> Dataset:
        X, y = validate_data(self, X, y, y_numeric=True, dtype=np.float64)
        if self.fit_intercept:
            X = np.column_stack([np.ones(X.shape[0]), X])
        return Dataset(y, X)

    def _control(self) -> SolverControl:
        return SolverControl(epsilon=self.epsilon, max_iterations=self.max_iter,
                             variance_step=getattr(self, "variance_step", "weighted_mean"))

    def _store(self, fit, data: Dataset) -> None:
        beta = fit.params.beta
        if self.fit_intercept:
            self.intercept_ = float(beta[0])
            self.coef_ = beta[1:].copy()
        else:
            self.intercept_ = 0.0
            self.coef_ = beta.copy()
        self.phi_ = fit.params.phi.copy()
        self.sigma2_ = fit.params.sigma2
        self.sigma_ = fit.params.sigma
        self.q_ = float(fit.q)
        self.n_iter_ = fit.iterations
        self.converged_ = fit.converged
        self.stationary_ = fit.stationary
        self.fit_ = fit
        self.dataset_ = data
        try:
            self.raic_ = raic(fit, data)
        except ArlqError:
            self.raic_ = float("nan")

    def inference(self, level: float = 0.95):
        """Sandwich covariance, standard errors and intervals of the fitted parameters."""
        check_is_fitted(self, "fit_")
        return asymptotic_report(self.fit_, self.dataset_, level)

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return X @ self.coef_ + self.intercept_


class CMLRegression(_ARErrorBase):
    """Linear regression with AR(p) errors by conditional maximum likelihood.

    Parameters
    ----------
    ar_order : int
        Order p of the autoregressive error process.
    fit_intercept : bool
        Prepend a constant column to ``X``.
    epsilon, max_iter
        Stopping rule of the alternating updates.

    Attributes
    ----------
    coef_, intercept_, phi_, sigma2_ : fitted parameters
    raic_ : robust AIC at the fit (the classical case of q = 1)
    fit_ : the underlying :class:`arlq.cml.CmlFit`
    """

    def __init__(self, ar_order: int = 1, fit_intercept: bool = True,
                 epsilon: float = 1e-8, max_iter: int = 500):
        self.ar_order = ar_order
        self.fit_intercept = fit_intercept
        self.epsilon = epsilon
        self.max_iter = max_iter

    def fit(self, X, y):
        data = self._dataset(X, y)
        self._store(cml_fit(data, self.ar_order, self._control()), data)
        return self


class CMLqRegression(_ARErrorBase):
    """Robust AR(p)-error regression by maximum Lq-likelihood.

    ``q="auto"`` picks q on ``grid`` by minimising the robust AIC; the curve
    is kept in ``raic_curve_``.  A numeric ``q`` in (0, 1] fits that value,
    and ``q=1`` reproduces :class:`CMLRegression`.  ``variance_step`` is
    passed to :class:`arlq.cml.SolverControl`.
    """

    def __init__(self, ar_order: int = 1, q: float | str = "auto", grid=None,
                 fit_intercept: bool = True, epsilon: float = 1e-8,
                 max_iter: int = 500, variance_step: str = "weighted_mean"):
        self.ar_order = ar_order
        self.q = q
        self.grid = grid
        self.fit_intercept = fit_intercept
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.variance_step = variance_step

    def fit(self, X, y):
        data = self._dataset(X, y)
        if isinstance(self.q, str):
            if self.q != "auto":
                raise ValueError(f"q must be a number in (0, 1] or 'auto', got {self.q!r}")
            res = select_q(data, self.ar_order, self.grid, self._control())
            fit = res.fit_at_q_star
            self.raic_curve_ = res.raic_curve
        else:
            fit = ira_fit(data, self.ar_order, float(self.q), self._control())
        self._store(fit, data)
        self.weights_ = fit.weights.w.copy()
        self.sigma2_corrected_ = fit.sigma2_surrogate_corrected
        return self


__all__ = ["CMLRegression", "CMLqRegression"]
