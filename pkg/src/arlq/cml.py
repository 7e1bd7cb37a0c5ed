"""Conditional maximum likelihood (CML) by alternating closed-form updates.

Each sweep updates phi (least squares of e_t on its lags), then beta
(generalised least squares on the backshift-transformed data), then sigma2
(mean squared innovation).  The robust CMLq fit in :mod:`arlq.cmlq` runs the
same loop with observation weights; with unit weights the two coincide.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from .exceptions import DegenerateWeightsError, DomainError, SingularityError
from .model import (
    Dataset,
    FloatArray,
    ParameterVector,
    _filter,
    conditional_log_likelihood,
    is_stationary,
    lag_matrix,
)

logger = logging.getLogger(__name__)

#: matrices whose 2-norm condition number exceeds this are treated as singular
MAX_CONDITION = 1e10

#: weights are floored here before forming W
WEIGHT_FLOOR = 1e-300

#: sigma2 below this fraction of its starting value counts as a collapsed fit
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class SolverControl:
    """Stopping rule for the alternating fits.

    The loop stops once max|d beta|, max|d phi| and |d sigma2| are all below
    ``epsilon``, or after ``max_iterations`` sweeps.

    ``variance_step`` picks the robust variance update.  ``"weighted_mean"``
    is ``sum(w a^2) / sum(w)``; ``"scaled"`` multiplies that by q.  The two
    agree at q = 1.  The scaled form tends to drive sigma2 to zero for q well
    below 1, so it is not the default.
    """

    epsilon: float = 1e-8
    max_iterations: int = 500
    trace: bool = False
    variance_step: Literal["weighted_mean", "scaled"] = "weighted_mean"

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iterations) < 1:
            raise DomainError(
                f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.variance_step not in ("weighted_mean", "scaled"):
            raise DomainError("variance_step must be 'weighted_mean' or 'scaled', "
                              f"got {self.variance_step!r}")


@dataclass
class CmlFit:
    """Result of :func:`cml_fit`.

    ``degenerate`` marks an exact fit (sigma2 == 0); ``stationary`` reports
    whether the final phi defines a stationary AR process.
    """

    params: ParameterVector
    iterations: int
    converged: bool
    loglik: float
    degenerate: bool = False
    stationary: bool = True
    trace: list[ParameterVector] | None = field(default=None, repr=False)

    q: float = field(default=1.0, init=False)

    @property
    def ar_order(self) -> int:
        return self.params.phi.size

    @property
    def lq_value(self) -> float:
        return self.loglik


def _weighted_lstsq(A: FloatArray, b: FloatArray, w: FloatArray | None,
                    what: str) -> FloatArray:
    """Minimise sum_t w_t (b_t - A_t' x)^2, raising on a singular cross-product."""
    if w is not None:
        r = np.sqrt(w)
        A = A * r[:, None]
        b = b * r
    if A.shape[1] == 0:
        return np.zeros(0)
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if not cond < MAX_CONDITION:
        raise SingularityError(
            f"{what} is singular (condition number {cond:.3g} of the weighted "
            f"design; cross-product condition {cond * cond:.3g})",
            condition_number=cond * cond)
    return Vt.T @ ((U.T @ b) / sv)


def _beta_step(data: Dataset, phi: FloatArray, w: FloatArray | None) -> FloatArray:
    ty = _filter(data.y, phi)
    tX = _filter(data.X, phi)
    return _weighted_lstsq(tX, ty, w, "transformed design cross-product")


def _phi_step(data: Dataset, beta: FloatArray, p: int,
              w: FloatArray | None) -> FloatArray:
    e = data.y - data.X @ beta
    return _weighted_lstsq(lag_matrix(e, p), e[p:], w,
                           "lagged-residual matrix R")


def _innovations(data: Dataset, beta: FloatArray, phi: FloatArray) -> FloatArray:
    return _filter(data.y - data.X @ beta, phi)


def cml_beta_update(data: Dataset, phi: ArrayLike) -> FloatArray:
    """Generalised least squares coefficients on the transformed data, given ``phi``."""
    return _beta_step(data, np.asarray(phi, dtype=float).reshape(-1), None)


def cml_phi_update(data: Dataset, beta: ArrayLike, p: int) -> FloatArray:
    """Solve ``R(beta) phi = R_0(beta)`` built from lagged residuals."""
    return _phi_step(data, np.asarray(beta, dtype=float), int(p), None)


def cml_sigma_update(data: Dataset, beta: ArrayLike, phi: ArrayLike) -> float:
    """Mean squared innovation over the N - p conditional observations."""
    a = _innovations(data, np.asarray(beta, dtype=float),
                     np.asarray(phi, dtype=float).reshape(-1))
    return float(np.mean(a * a))


def initial_params(data: Dataset, p: int) -> ParameterVector:
    """OLS on the untransformed data, phi = 0, sigma2 = mean squared OLS residual."""
    beta = _weighted_lstsq(data.X, data.y, None, "design cross-product X'X")
    e = data.y - data.X @ beta
    return ParameterVector(beta, np.zeros(p), float(np.mean(e * e)))


@dataclass
class _LoopResult:
    params: ParameterVector
    iterations: int
    converged: bool
    degenerate: bool
    trace: list[ParameterVector] | None


def alternating_fit(data: Dataset, p: int, q: float, control: SolverControl,
                    start: ParameterVector | None = None) -> _LoopResult:
    """Iteratively reweighted alternating updates shared by CML and CMLq.

    One sweep, from the current ``(beta, phi, sigma2)``:

    1. ``w_t = f(a_t; sigma2)^(1-q)`` (unity when q = 1);
    2. phi from the weighted lagged-residual system at the current beta;
    3. beta by weighted least squares on data transformed with the new phi;
    4. ``sigma2 = sum(w a^2) / sum(w)`` at the new (beta, phi), times q when
       ``control.variance_step == "scaled"``;
    5. stop when every block moved less than ``control.epsilon``.
    """
    data.check_order(p)
    params = start if start is not None else initial_params(data, p)
    beta, phi, s2 = params.beta, params.phi, params.sigma2
    trace = [params] if control.trace else None
    s2_ref = s2
    if s2 <= 0:
        return _LoopResult(params, 0, True, True, trace)

    unit = q == 1.0
    factor = q if control.variance_step == "scaled" else 1.0
    for it in range(1, control.max_iterations + 1):
        if unit:
            w = None
        else:
            a = _innovations(data, beta, phi)
            logf = -0.5 * (np.log(2 * np.pi * s2) + a * a / s2)
            w = np.exp((1.0 - q) * logf)
            if not np.any(w > WEIGHT_FLOOR):
                raise DegenerateWeightsError("all observation weights underflowed",
                                             iteration=it)
            w = np.maximum(w, WEIGHT_FLOOR)
        try:
            phi_new = _phi_step(data, beta, p, w)
            beta_new = _beta_step(data, phi_new, w)
        except SingularityError as exc:
            raise SingularityError(str(exc), exc.condition_number, iteration=it) from None
        a = _innovations(data, beta_new, phi_new)
        if unit:
            s2_new = float(np.mean(a * a))
        else:
            s2_new = factor * float(np.sum(w * a * a) / np.sum(w))

        done = (np.max(np.abs(beta_new - beta), initial=0.0) < control.epsilon
                and np.max(np.abs(phi_new - phi), initial=0.0) < control.epsilon
                and abs(s2_new - s2) < control.epsilon)
        beta, phi, s2 = beta_new, phi_new, s2_new
        if trace is not None:
            trace.append(ParameterVector(beta, phi, s2))
        if s2 <= DEGENERATE_RTOL * s2_ref:
            logger.debug("sigma2 collapsed to %g at iteration %d", s2, it)
            return _LoopResult(ParameterVector(beta, phi, s2), it, True, True, trace)
        if done:
            return _LoopResult(ParameterVector(beta, phi, s2), it, True, False, trace)
    return _LoopResult(ParameterVector(beta, phi, s2), control.max_iterations,
                       False, False, trace)


def cml_fit(data: Dataset, p: int, control: SolverControl | None = None) -> CmlFit:
    """Conditional maximum likelihood fit of the AR(p)-error regression.

    Non-convergence is reported through ``converged=False`` with the last
    iterate, never raised.
    """
    control = control or SolverControl()
    res = alternating_fit(data, int(p), 1.0, control)
    params = res.params
    loglik = (conditional_log_likelihood(data, params) if params.sigma2 > 0
              else float("inf"))
    if not res.converged:
        logger.warning("CML fit did not converge in %d iterations", res.iterations)
    return CmlFit(params, res.iterations, res.converged, loglik,
                  degenerate=res.degenerate, stationary=is_stationary(params.phi),
                  trace=res.trace)
