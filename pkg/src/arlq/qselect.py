"""Choice of the tuning parameter q by a robust AIC grid search."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .cml import SolverControl
from .cmlq import CmlqFit, ira_fit
from .exceptions import (
    ArlqError,
    DomainError,
    NoValidQError,
    SingularityError,
)
from .model import Dataset, FloatArray, modified_score_terms, observation_terms

logger = logging.getLogger(__name__)

#: 0.30, 0.31, ..., 1.00
DEFAULT_GRID: FloatArray = np.round(np.arange(30, 101) / 100.0, 2)


def raic(fit: CmlqFit, data: Dataset) -> float:
    """Robust AIC: mean negative Lq-likelihood plus ``tr(-M2^-1 M1)``.

    ``M1`` is the summed outer product of the weighted scores and ``M2`` the
    summed Jacobian of the weighted scores, both at the fitted parameters.
    """
    q = float(fit.q)
    terms = observation_terms(data, fit.params)
    u_star, grad = modified_score_terms(terms, q)
    n = u_star.shape[0]
    M1 = u_star.T @ u_star
    M2 = grad.sum(axis=0)
    cond = float(np.linalg.cond(M2))
    if not cond < 1e14:
        raise SingularityError("second-derivative matrix M2 is singular",
                               condition_number=cond)
    penalty = float(np.trace(-np.linalg.solve(M2, M1)))
    return -fit.lq_value / n + penalty


@dataclass
class QSearchResult:
    """Outcome of :func:`select_q`.

    ``raic_curve`` holds ``(q, raic)`` for every usable grid point in
    ascending q; ``failures`` maps each skipped q to the reason.
    """

    q_star: float
    raic_curve: list[tuple[float, float]]
    fit_at_q_star: CmlqFit
    failures: dict[float, str] = field(default_factory=dict)

    @property
    def raic_star(self) -> float:
        return dict(self.raic_curve)[self.q_star]


def _check_grid(grid: ArrayLike) -> FloatArray:
    grid = np.unique(np.asarray(grid, dtype=float).reshape(-1))
    if grid.size == 0:
        raise DomainError("q grid is empty")
    if np.any(grid <= 0) or np.any(grid > 1):
        raise DomainError("q grid values must lie in (0, 1]")
    return grid


def _usable(fit: CmlqFit) -> str | None:
    if fit.degenerate:
        return "variance collapsed to zero"
    if not fit.converged:
        return "did not converge"
    return None


def select_q(data: Dataset, p: int, grid: ArrayLike | None = None,
             control: SolverControl | None = None) -> QSearchResult:
    """Fit CMLq over ``grid`` and return the q minimising :func:`raic`.

    Grid points are visited in descending q, each warm-started from the
    previous usable fit; a point that fails warm falls back to a cold start.
    Non-converged, collapsed or singular points are skipped.  Ties go to the
    larger q.
    """
    grid = _check_grid(DEFAULT_GRID if grid is None else grid)
    control = control or SolverControl()
    curve: dict[float, float] = {}
    fits: dict[float, CmlqFit] = {}
    failures: dict[float, str] = {}
    previous: CmlqFit | None = None

    for q in grid[::-1]:
        q = float(q)
        fit = None
        reason = None
        starts = [None] if previous is None else [previous.params, None]
        for start in starts:
            try:
                candidate = ira_fit(data, p, q, control, start=start)
            except ArlqError as exc:
                reason = str(exc)
                continue
            reason = _usable(candidate)
            if reason is None:
                fit = candidate
            if reason is None or candidate.degenerate:
                break
        if fit is None:
            failures[q] = reason or "failed"
            logger.debug("q=%g skipped: %s", q, failures[q])
            continue
        try:
            value = raic(fit, data)
        except ArlqError as exc:
            failures[q] = str(exc)
            continue
        if not np.isfinite(value):
            failures[q] = "non-finite RAIC"
            continue
        curve[q] = value
        fits[q] = fit
        previous = fit

    if not curve:
        raise NoValidQError(
            f"no grid point produced a usable fit ({len(failures)} failures)")
    qs = sorted(curve)
    best = min(curve.values())
    q_star = max(q for q in qs if curve[q] == best)
    return QSearchResult(q_star, [(q, curve[q]) for q in qs], fits[q_star], failures)
