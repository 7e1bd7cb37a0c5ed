"""Linear regression with AR(p) errors: data types, likelihoods and derivatives.

The model is

    y_t = x_t' beta + e_t,    e_t = phi_1 e_{t-1} + ... + phi_p e_{t-p} + a_t,

with a_t iid N(0, sigma2).  Everything here is conditional on the first ``p``
observations, so all sums run over t = p+1..N (zero-based rows ``p..N-1``).

The parameter vector is ordered ``(beta_1..beta_M, phi_1..phi_p, sigma2)``
throughout; gradients and Hessians use the same ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import DimensionError, DomainError

LOG_2PI = float(np.log(2.0 * np.pi))

#: below this distance from 1 the deformed logarithm is evaluated as ``log``
LQ_LOG_SWITCH = 1e-10

#: companion-matrix eigenvalues must satisfy |lambda| < 1 - this
STATIONARITY_MARGIN = 1e-8

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class Dataset:
    """Response vector ``y`` (length N) and covariate matrix ``X`` (N x M).

    Row ``t`` (zero based) is time ``t + 1``.
    """

    y: FloatArray
    X: FloatArray
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1:
            raise DimensionError(f"y must be one-dimensional, got shape {y.shape}")
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionError(
                f"X must be N x M with N = len(y) = {y.shape[0]}, got {X.shape}")
        if not np.all(np.isfinite(y)):
            raise DomainError("y contains non-finite values")
        if not np.all(np.isfinite(X)):
            raise DomainError("X contains non-finite values")
        if self.names is not None and len(self.names) != X.shape[1]:
            raise DimensionError("names must have one entry per column of X")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]

    def check_order(self, p: int) -> None:
        """Raise if there are too few observations for an AR(p) fit."""
        if p < 0:
            raise DimensionError(f"AR order must be >= 0, got {p}")
        need = p + self.n_covariates + 2
        if self.n_obs < need:
            raise DimensionError(
                f"N = {self.n_obs} observations is too few for p = {p} and "
                f"M = {self.n_covariates}; need at least {need}")


@dataclass(frozen=True)
class ParameterVector:
    """Full parameter ``theta = (beta, phi, sigma2)``."""

    beta: FloatArray
    phi: FloatArray
    sigma2: float

    def __post_init__(self) -> None:
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        phi = np.asarray(self.phi, dtype=float).reshape(-1).copy()
        beta.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def n_params(self) -> int:
        return self.beta.size + self.phi.size + 1

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    def to_array(self) -> FloatArray:
        return np.concatenate([self.beta, self.phi, [self.sigma2]])

    @classmethod
    def from_array(cls, theta: ArrayLike, n_covariates: int) -> ParameterVector:
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:n_covariates], theta[n_covariates:-1], theta[-1])

    def replace(self, **changes: Any) -> ParameterVector:
        values = {"beta": self.beta, "phi": self.phi, "sigma2": self.sigma2}
        values.update(changes)
        return ParameterVector(**values)

    @property
    def is_stationary(self) -> bool:
        return is_stationary(self.phi)


@dataclass(frozen=True)
class TransformedData:
    """Rows t = p+1..N of ``Phi(B) y`` and ``Phi(B) X``."""

    ty: FloatArray
    tX: FloatArray


@dataclass(frozen=True)
class ResidualSet:
    """Regression residuals ``e`` (length N) and innovations ``a`` (length N-p)."""

    e: FloatArray
    a: FloatArray


@dataclass(frozen=True)
class WeightVector:
    """Observation weights ``f(a_t)^(1-q)`` for t = p+1..N."""

    w: FloatArray
    q: float

    @property
    def trace(self) -> float:
        return float(np.sum(self.w))


@dataclass(frozen=True)
class ObservationTerms:
    """Per-observation pieces shared by the estimators and inference.

    ``scores[t]`` is the score of observation t, ``hessians[t]`` its matrix of
    second derivatives and ``logpdf[t]`` the log density of its innovation.
    """

    residuals: ResidualSet
    logpdf: FloatArray
    scores: FloatArray
    hessians: FloatArray = field(repr=False)


def is_stationary(phi: ArrayLike, margin: float = STATIONARITY_MARGIN) -> bool:
    """True when every root of 1 - phi_1 z - ... - phi_p z^p lies outside the unit circle.

    Checked through the eigenvalues of the companion matrix, which are the
    reciprocals of those roots.
    """
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size == 0:
        return True
    companion = np.zeros((phi.size, phi.size))
    companion[0] = phi
    companion[1:, :-1] = np.eye(phi.size - 1)
    return bool(np.max(np.abs(np.linalg.eigvals(companion))) < 1.0 - margin)


def lag_matrix(v: ArrayLike, p: int) -> FloatArray:
    """Stack lags 1..p of ``v`` for rows p..N-1.

    For a vector the result is (N-p) x p with ``out[s, l-1] = v[p+s-l]``; for
    an N x M matrix it is (N-p) x p x M.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    if p == 0:
        return np.zeros((n,) + (0,) + v.shape[1:])
    return np.stack([v[p - lag:n - lag] for lag in range(1, p + 1)], axis=1)


def _filter(v: FloatArray, phi: FloatArray) -> FloatArray:
    p = phi.size
    n = v.shape[0]
    out = v[p:].copy()
    for lag in range(1, p + 1):
        out -= phi[lag - 1] * v[p - lag:n - lag]
    return out


def backshift_transform(data: Dataset, phi: ArrayLike) -> TransformedData:
    """Apply ``Phi(B) = 1 - phi_1 B - ... - phi_p B^p`` to ``y`` and each column of ``X``.

    Returns rows t = p+1..N only (N - p rows).
    """
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size >= data.n_obs:
        raise DimensionError(
            f"AR order p = {phi.size} must be smaller than N = {data.n_obs}")
    return TransformedData(_filter(data.y, phi), _filter(data.X, phi))


def _check_params(data: Dataset, params: ParameterVector) -> None:
    if params.beta.size != data.n_covariates:
        raise DimensionError(
            f"beta has {params.beta.size} entries but X has "
            f"{data.n_covariates} columns")
    if params.phi.size >= data.n_obs:
        raise DimensionError(
            f"AR order p = {params.phi.size} must be smaller than N = {data.n_obs}")


def _check_sigma2(sigma2: float) -> None:
    if not sigma2 > 0 or not np.isfinite(sigma2):
        raise DomainError(f"sigma2 must be positive and finite, got {sigma2}")


def residuals(data: Dataset, params: ParameterVector) -> ResidualSet:
    """Regression residuals ``e_t = y_t - x_t' beta`` and innovations ``a_t = Phi(B) e_t``."""
    _check_params(data, params)
    e = data.y - data.X @ params.beta
    return ResidualSet(e, _filter(e, params.phi))


def normal_logpdf(a: ArrayLike, sigma2: float) -> FloatArray:
    """Log density of N(0, sigma2) at ``a``."""
    _check_sigma2(sigma2)
    a = np.asarray(a, dtype=float)
    return -0.5 * (LOG_2PI + np.log(sigma2)) - 0.5 * a * a / sigma2


def conditional_log_likelihood(data: Dataset, params: ParameterVector) -> float:
    """Sum of normal log densities of the innovations a_{p+1}..a_N."""
    _check_sigma2(params.sigma2)
    a = residuals(data, params).a
    return float(np.sum(normal_logpdf(a, params.sigma2)))


def _lq_from_log(log_u: FloatArray | float, q: float) -> FloatArray | float:
    if abs(1.0 - q) < LQ_LOG_SWITCH:
        return log_u
    return np.expm1((1.0 - q) * np.asarray(log_u)) / (1.0 - q)


def lq(u: ArrayLike, q: float) -> FloatArray | float:
    """Deformed logarithm ``(u^(1-q) - 1) / (1 - q)``; ``log u`` at q = 1."""
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0):
        raise DomainError("lq is only defined for u > 0")
    out = _lq_from_log(np.log(u_arr), q)
    return float(out) if np.ndim(out) == 0 else out


def lq_likelihood(data: Dataset, params: ParameterVector, q: float) -> float:
    """Sum over t = p+1..N of ``lq(f(a_t), q)`` with f the N(0, sigma2) density.

    Works on log densities, so tiny density values do not underflow.
    """
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    if q == 1.0:
        return conditional_log_likelihood(data, params)
    _check_sigma2(params.sigma2)
    logf = normal_logpdf(residuals(data, params).a, params.sigma2)
    return float(np.sum(_lq_from_log(logf, q)))


def weights(data: Dataset, params: ParameterVector, q: float) -> WeightVector:
    """Observation weights ``f(a_t)^(1-q)``; identically one when q = 1."""
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    logf = normal_logpdf(residuals(data, params).a, params.sigma2)
    return WeightVector(np.exp((1.0 - q) * logf), float(q))


def observation_terms(data: Dataset, params: ParameterVector,
                      hessians: bool = True) -> ObservationTerms:
    """Per-observation scores and second derivatives of ``log f(a_t)``.

    Score components, per row t:

    * beta_k:  a_t Phi(B)x_{t,k} / sigma2
    * phi_l:   a_t e_{t-l} / sigma2
    * sigma2:  -1/(2 sigma2) + a_t^2 / (2 sigma2^2)
    """
    _check_params(data, params)
    _check_sigma2(params.sigma2)
    M = data.n_covariates
    p = params.phi.size
    s2 = params.sigma2
    res = residuals(data, params)
    a = res.a
    n = a.size
    tX = _filter(data.X, params.phi)
    lag_e = lag_matrix(res.e, p)               # (n, p)

    k = M + p + 1
    scores = np.empty((n, k))
    scores[:, :M] = (a / s2)[:, None] * tX
    scores[:, M:M + p] = (a / s2)[:, None] * lag_e
    scores[:, -1] = -0.5 / s2 + 0.5 * a * a / s2**2

    H = np.empty((0, k, k))
    if hessians:
        lag_X = lag_matrix(data.X, p)          # (n, p, M)
        H = np.empty((n, k, k))
        H[:, :M, :M] = -np.einsum("tj,tk->tjk", tX, tX) / s2
        bp = -(np.einsum("ti,tj->tji", lag_e, tX)
               + a[:, None, None] * np.transpose(lag_X, (0, 2, 1))) / s2
        H[:, :M, M:M + p] = bp
        H[:, M:M + p, :M] = np.transpose(bp, (0, 2, 1))
        bs = -(a / s2**2)[:, None] * tX
        H[:, :M, -1] = bs
        H[:, -1, :M] = bs
        H[:, M:M + p, M:M + p] = -np.einsum("ti,tr->tir", lag_e, lag_e) / s2
        ps = -(a / s2**2)[:, None] * lag_e
        H[:, M:M + p, -1] = ps
        H[:, -1, M:M + p] = ps
        H[:, -1, -1] = 0.5 / s2**2 - a * a / s2**3
    return ObservationTerms(res, normal_logpdf(a, s2), scores, H)


def score(data: Dataset, params: ParameterVector) -> FloatArray:
    """Gradient of :func:`conditional_log_likelihood` with respect to theta."""
    return observation_terms(data, params, hessians=False).scores.sum(axis=0)


def score_jacobian(data: Dataset, params: ParameterVector) -> FloatArray:
    """Hessian of :func:`conditional_log_likelihood` with respect to theta."""
    return observation_terms(data, params).hessians.sum(axis=0)


def modified_score_terms(terms: ObservationTerms, q: float) -> tuple[FloatArray, FloatArray]:
    """Weighted per-observation scores and their Jacobians.

    Returns ``(u_star, grad_u_star)`` with ``u_star[t] = w_t u_t`` and
    ``grad_u_star[t] = w_t ((1-q) u_t u_t' + H_t)``.
    """
    if q == 1.0:
        return terms.scores, terms.hessians
    w = np.exp((1.0 - q) * terms.logpdf)
    u = terms.scores
    u_star = w[:, None] * u
    grad = np.empty((0,) + terms.hessians.shape[1:])
    if terms.hessians.size:
        outer = np.einsum("ti,tj->tij", u, u)
        grad = w[:, None, None] * ((1.0 - q) * outer + terms.hessians)
    return u_star, grad


def modified_score(data: Dataset, params: ParameterVector, q: float) -> FloatArray:
    """Gradient of :func:`lq_likelihood`: ``sum_t f(a_t)^(1-q) U(a_t)``."""
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    terms = observation_terms(data, params, hessians=False)
    return modified_score_terms(terms, q)[0].sum(axis=0)


def modified_score_jacobian(data: Dataset, params: ParameterVector,
                            q: float) -> FloatArray:
    """Jacobian of :func:`modified_score`; equals :func:`score_jacobian` at q = 1."""
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    terms = observation_terms(data, params)
    return modified_score_terms(terms, q)[1].sum(axis=0)
