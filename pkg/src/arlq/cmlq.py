"""Robust conditional maximum Lq-likelihood (CMLq) estimation.

For fixed ``q`` the CMLq estimating equations are the CML ones with each
observation weighted by ``f(a_t)^(1-q)``.  :func:`ira_fit` solves them with the
iteratively reweighted algorithm; the weighted closed-form updates are exposed
individually.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .cml import (
    SolverControl,
    _beta_step,
    _innovations,
    _phi_step,
    alternating_fit,
)
from .exceptions import DegenerateWeightsError, DomainError
from .model import (
    Dataset,
    FloatArray,
    ParameterVector,
    WeightVector,
    is_stationary,
    lq_likelihood,
    weights,
)

logger = logging.getLogger(__name__)


@dataclass
class CmlqFit:
    """Result of :func:`ira_fit`.

    ``params.sigma2`` is the loop's own variance iterate, ``sigma2_raw``.  With
    the default weighted-mean variance step it estimates ``q * sigma2``, so
    ``sigma2_surrogate_corrected = sigma2_raw / q`` is the innovation variance
    on the usual scale.  ``sigma2_root`` is the variance at which the weighted
    estimating equations hold; it differs from ``sigma2_raw`` only for the
    scaled step.
    """

    params: ParameterVector
    q: float
    weights: WeightVector
    iterations: int
    converged: bool
    lq_value: float
    degenerate: bool = False
    stationary: bool = True
    trace: list[ParameterVector] | None = field(default=None, repr=False)
    variance_step: str = "weighted_mean"

    @property
    def sigma2_root(self) -> float:
        if self.variance_step == "scaled":
            return self.params.sigma2 / self.q
        return self.params.sigma2

    @property
    def sigma2_raw(self) -> float:
        return self.params.sigma2

    @property
    def sigma2_surrogate_corrected(self) -> float:
        return self.params.sigma2 / self.q

    @property
    def ar_order(self) -> int:
        return self.params.phi.size


def _as_weights(w: WeightVector | ArrayLike) -> FloatArray:
    w = np.asarray(w.w if isinstance(w, WeightVector) else w, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite and non-negative")
    return w


def cmlq_beta_update(data: Dataset, phi: ArrayLike,
                     w: WeightVector | ArrayLike) -> FloatArray:
    """Weighted least squares on the transformed data with ``W = diag(w)``."""
    return _beta_step(data, np.asarray(phi, dtype=float).reshape(-1), _as_weights(w))


def cmlq_phi_update(data: Dataset, beta: ArrayLike, w: WeightVector | ArrayLike,
                    p: int) -> FloatArray:
    """Solve the weighted lagged-residual system ``R_w(beta) phi = R_w0(beta)``."""
    return _phi_step(data, np.asarray(beta, dtype=float), int(p), _as_weights(w))


def cmlq_sigma_update(data: Dataset, beta: ArrayLike, phi: ArrayLike,
                      w: WeightVector | ArrayLike, q: float,
                      variance_step: str = "weighted_mean") -> float:
    """Weighted mean squared innovation ``sum(w a^2) / sum(w)``.

    With ``variance_step="scaled"`` the result is multiplied by ``q``.
    """
    if variance_step not in ("weighted_mean", "scaled"):
        raise DomainError(f"unknown variance_step {variance_step!r}")
    w = _as_weights(w)
    total = float(np.sum(w))
    if not total > 0:
        raise DegenerateWeightsError("weights sum to zero")
    a = _innovations(data, np.asarray(beta, dtype=float),
                     np.asarray(phi, dtype=float).reshape(-1))
    value = float(np.sum(w * a * a)) / total
    return q * value if variance_step == "scaled" else value


def ira_fit(data: Dataset, p: int, q: float, control: SolverControl | None = None,
            start: ParameterVector | None = None) -> CmlqFit:
    """CMLq fit for fixed ``q`` in (0, 1] by iterative reweighting.

    Starts from OLS (or ``start`` when given, as used by warm-started q
    searches).  At q = 1 the iterates are exactly those of
    :func:`arlq.cml.cml_fit`.

    Raises
    ------
    SingularityError, DegenerateWeightsError
        With the failing iteration index attached.
    """
    if not 0 < q <= 1:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    control = control or SolverControl()
    res = alternating_fit(data, int(p), float(q), control, start=start)
    params = res.params
    if params.sigma2 > 0:
        w = weights(data, params, q)
        value = lq_likelihood(data, params, q)
    else:
        w = WeightVector(np.ones(data.n_obs - int(p)), float(q))
        value = float("inf")
    if not res.converged:
        # grid searches hit this routinely; callers read fit.converged
        logger.debug("CMLq fit (q=%g) did not converge in %d iterations",
                       q, res.iterations)
    return CmlqFit(params, float(q), w, res.iterations, res.converged, value,
                   degenerate=res.degenerate, stationary=is_stationary(params.phi),
                   trace=res.trace, variance_step=control.variance_step)
