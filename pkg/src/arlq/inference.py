"""Sandwich covariance, standard errors and confidence intervals.

For an M-estimator solving ``sum_t u*_t(theta) = 0`` the asymptotic covariance
is ``J^-1 K J^-1 / n`` with ``J`` the mean Jacobian of ``u*_t`` and ``K`` the
mean outer product.  Both are estimated by sample averages over the N - p
conditional observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .cml import CmlFit
from .cmlq import CmlqFit
from .exceptions import DomainError, InferenceUnavailableError
from .model import (
    Dataset,
    FloatArray,
    ParameterVector,
    modified_score_terms,
    observation_terms,
)

#: J with a larger 2-norm condition number is treated as singular
MAX_J_CONDITION = 1e12


def surrogate_parameter(params: ParameterVector, q: float) -> ParameterVector:
    """Value targeted by the Lq estimating equations: sigma2 scaled by q, rest unchanged."""
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    return params.replace(sigma2=q * params.sigma2)


def estimate_JK(data: Dataset, params: ParameterVector,
                q: float) -> tuple[FloatArray, FloatArray]:
    """Plug-in estimates of ``J = E[grad u*]`` and ``K = E[u* u*']``."""
    terms = observation_terms(data, params)
    u_star, grad = modified_score_terms(terms, q)
    n = u_star.shape[0]
    J = grad.sum(axis=0) / n
    K = u_star.T @ u_star / n
    return 0.5 * (J + J.T), K


@dataclass(frozen=True)
class AsymptoticReport:
    """Asymptotic covariance of ``theta = (beta, phi, sigma2)`` and derived intervals.

    ``sigma``, ``se_sigma`` and ``sigma_ci`` restate the variance entry on the
    standard-deviation scale (delta method).
    """

    estimate: FloatArray
    covariance: FloatArray
    se: FloatArray
    ci_lower: FloatArray
    ci_upper: FloatArray
    level: float
    sigma: float
    se_sigma: float
    sigma_ci: tuple[float, float]
    J: FloatArray
    K: FloatArray


def _sandwich(J: FloatArray, K: FloatArray) -> FloatArray:
    cond = float(np.linalg.cond(J))
    if not cond < MAX_J_CONDITION:
        raise InferenceUnavailableError(
            f"Jacobian J of the estimating equations is singular "
            f"(condition number {cond:.3g})", condition_number=cond)
    Jinv = np.linalg.inv(J)
    V = Jinv @ K @ Jinv.T
    return 0.5 * (V + V.T)


def asymptotic_report(fit: CmlFit | CmlqFit, data: Dataset,
                      level: float = 0.95) -> AsymptoticReport:
    """Sandwich standard errors and symmetric z-intervals for a fitted model.

    J and K are evaluated where the weighted estimating equations hold.  For
    the scaled variance step that is ``sigma2_raw / q``, and the variance row
    of the covariance is mapped back to the reported ``sigma2_raw`` scale.
    """
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    q = float(fit.q)
    params = fit.params
    root_s2 = getattr(fit, "sigma2_root", params.sigma2)
    root = params.replace(sigma2=root_s2)
    J, K = estimate_JK(data, root, q)
    n = data.n_obs - params.phi.size
    cov = _sandwich(J, K) / n
    if root_s2 != params.sigma2:
        scale = np.ones(cov.shape[0])
        scale[-1] = params.sigma2 / root_s2
        cov = cov * np.outer(scale, scale)

    est = params.to_array()
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    z = float(stats.norm.ppf(0.5 * (1.0 + level)))
    half = z * se
    sigma = params.sigma
    se_sigma = float(se[-1] / (2.0 * sigma)) if sigma > 0 else float("nan")
    return AsymptoticReport(
        estimate=est, covariance=cov, se=se,
        ci_lower=est - half, ci_upper=est + half, level=float(level),
        sigma=sigma, se_sigma=se_sigma,
        sigma_ci=(sigma - z * se_sigma, sigma + z * se_sigma),
        J=J, K=K)
