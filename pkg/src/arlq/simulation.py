"""Monte Carlo harness: AR(p)-error data generation, contamination, aggregation.

Every replication draws from its own generator, seeded from
``SeedSequence(seed, spawn_key=(replication,))``, so a study gives the same
report whether it runs serially or across processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.signal import lfilter

from .cml import SolverControl, cml_fit
from .cmlq import ira_fit
from .exceptions import ArlqError, ConfigError
from .inference import asymptotic_report
from .model import Dataset, FloatArray, is_stationary
from .qselect import select_q

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContaminationSpec:
    """Outlier scheme.

    ``case`` "I" is clean data, "II" replaces a fraction ``rate`` of responses
    with N(outlier_mean, outlier_sd^2) draws, "III" also replaces covariates.
    ``x_rows`` chooses whether the covariate outlier rows are drawn
    independently of the response outlier rows or are the same rows;
    ``x_columns`` whether all covariates of a row are replaced or one.
    """

    case: Literal["I", "II", "III"] = "I"
    rate: float = 0.10
    outlier_mean: float = 10.0
    outlier_sd: float = 1.0
    x_rows: Literal["independent", "same"] = "independent"
    x_columns: Literal["all", "one"] = "all"

    def __post_init__(self) -> None:
        if self.case not in ("I", "II", "III"):
            raise ConfigError("contamination.case", f"must be I, II or III, got {self.case!r}")
        if not 0 <= self.rate < 0.5:
            raise ConfigError("contamination.rate", f"must lie in [0, 0.5), got {self.rate}")
        if not self.outlier_sd > 0:
            raise ConfigError("contamination.outlier_sd", "must be positive")
        if self.x_rows not in ("independent", "same"):
            raise ConfigError("contamination.x_rows", "must be 'independent' or 'same'")
        if self.x_columns not in ("all", "one"):
            raise ConfigError("contamination.x_columns", "must be 'all' or 'one'")

    def n_outliers(self, n_obs: int) -> int:
        if self.case == "I":
            return 0
        # round before ceil so 0.1 * 50 gives 5, not 6
        return int(math.ceil(round(self.rate * n_obs, 9)))


@dataclass(frozen=True)
class ScenarioConfig:
    n_obs: int
    beta_true: tuple[float, ...]
    phi_true: tuple[float, ...]
    sigma_true: float = 1.0
    contamination: ContaminationSpec = field(default_factory=ContaminationSpec)
    replications: int = 100
    seed: int = 0
    burn_in: int = 500

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        object.__setattr__(self, "phi_true", tuple(float(f) for f in self.phi_true))
        if len(self.beta_true) == 0:
            raise ConfigError("beta_true", "needs at least one coefficient")
        if not is_stationary(self.phi_true):
            raise ConfigError("phi_true", f"{self.phi_true} is not stationary")
        if self.sigma_true < 0:
            raise ConfigError("sigma_true", "must be non-negative")
        if self.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        if self.burn_in < 0:
            raise ConfigError("burn_in", "must be >= 0")
        need = len(self.phi_true) + len(self.beta_true) + 2
        if self.n_obs < need:
            raise ConfigError("n_obs", f"must be at least {need} for this design")

    @property
    def ar_order(self) -> int:
        return len(self.phi_true)

    @property
    def true_values(self) -> FloatArray:
        """Truth in report order: beta, phi, sigma."""
        return np.array([*self.beta_true, *self.phi_true, self.sigma_true])

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["beta_true"] = list(self.beta_true)
        d["phi_true"] = list(self.phi_true)
        return d

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> ScenarioConfig:
        raw = dict(raw)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        cont = raw.pop("contamination", {}) or {}
        if not isinstance(cont, dict):
            raise ConfigError("contamination", "must be a mapping")
        unknown = set(cont) - set(ContaminationSpec.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"contamination.{sorted(unknown)[0]}", "unknown field")
        for name in ("n_obs", "beta_true", "phi_true"):
            if name not in raw:
                raise ConfigError(name, "required field is missing")
        try:
            return cls(contamination=ContaminationSpec(**cont), **raw)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=(int(replication),)))


def generate_dataset(config: ScenarioConfig, rng: np.random.Generator) -> Dataset:
    """Draw X iid N(0, 1) and AR(p) errors started from zero ``burn_in`` steps early."""
    n, m = config.n_obs, len(config.beta_true)
    X = rng.standard_normal((n, m))
    a = config.sigma_true * rng.standard_normal(n + config.burn_in)
    e = lfilter([1.0], np.r_[1.0, -np.asarray(config.phi_true)], a)[config.burn_in:]
    return Dataset(X @ np.asarray(config.beta_true) + e, X)


def contaminate(data: Dataset, spec: ContaminationSpec,
                rng: np.random.Generator) -> Dataset:
    """Replace a fraction of responses (Case II) and covariate rows (Case III)."""
    if spec.case == "I":
        return data
    n = data.n_obs
    k = spec.n_outliers(n)
    y = data.y.copy()
    X = data.X.copy()
    y_rows = rng.choice(n, size=k, replace=False)
    y[y_rows] = rng.normal(spec.outlier_mean, spec.outlier_sd, size=k)
    if spec.case == "III":
        x_rows = y_rows if spec.x_rows == "same" else rng.choice(n, size=k, replace=False)
        if spec.x_columns == "all":
            X[x_rows] = rng.normal(spec.outlier_mean, spec.outlier_sd,
                                   size=(k, data.n_covariates))
        else:
            cols = rng.integers(data.n_covariates, size=k)
            X[x_rows, cols] = rng.normal(spec.outlier_mean, spec.outlier_sd, size=k)
    return Dataset(y, X, data.names)


@dataclass(frozen=True)
class Method:
    """An estimator run in a study: ``cml``, ``cmlq`` at fixed q, or ``cmlq`` with q = "auto"."""

    kind: Literal["cml", "cmlq"]
    q: float | Literal["auto"] = 1.0

    @classmethod
    def parse(cls, text: str | Method) -> Method:
        if isinstance(text, Method):
            return text
        name, _, q = str(text).strip().lower().partition(":")
        if name == "cml" and not q:
            return cls("cml", 1.0)
        if name == "cmlq":
            if q in ("", "auto"):
                return cls("cmlq", "auto")
            try:
                value = float(q)
            except ValueError:
                raise ConfigError("methods", f"bad q in {text!r}") from None
            if not 0 < value <= 1:
                raise ConfigError("methods", f"q must lie in (0, 1], got {value}")
            return cls("cmlq", value)
        raise ConfigError("methods", f"unknown method {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "cml":
            return "cml"
        return f"cmlq:{self.q if self.q == 'auto' else format(self.q, 'g')}"


@dataclass
class ReplicationResult:
    """Estimates and SEs of one method on one replication (``beta, phi, sigma``)."""

    replication: int
    method: str
    ok: bool
    q: float = float("nan")
    estimate: list[float] = field(default_factory=list)
    se: list[float] = field(default_factory=list)
    ci_lower: list[float] = field(default_factory=list)
    ci_upper: list[float] = field(default_factory=list)
    sigma_corrected: float = float("nan")
    iterations: int = 0
    error: str = ""


def _fit_one(data: Dataset, p: int, method: Method, control: SolverControl,
             grid: ArrayLike | None, level: float) -> tuple[Any, float]:
    if method.kind == "cml":
        return cml_fit(data, p, control), 1.0
    if method.q == "auto":
        res = select_q(data, p, grid, control)
        return res.fit_at_q_star, res.q_star
    return ira_fit(data, p, float(method.q), control), float(method.q)


def _summarise(fit: Any, data: Dataset, level: float) -> dict[str, Any]:
    params = fit.params
    est = [*params.beta, *params.phi, params.sigma]
    n = len(est)
    out: dict[str, Any] = {"estimate": est, "se": [float("nan")] * n,
                           "ci_lower": [float("nan")] * n,
                           "ci_upper": [float("nan")] * n}
    try:
        rep = asymptotic_report(fit, data, level)
    except ArlqError:
        return out
    out["se"] = [*rep.se[:-1], rep.se_sigma]
    out["ci_lower"] = [*rep.ci_lower[:-1], rep.sigma_ci[0]]
    out["ci_upper"] = [*rep.ci_upper[:-1], rep.sigma_ci[1]]
    return out


def run_replication(config: ScenarioConfig, replication: int,
                    methods: Sequence[Method], control: SolverControl,
                    grid: ArrayLike | None = None,
                    level: float = 0.95) -> list[ReplicationResult]:
    """Simulate one dataset and fit every method on it."""
    rng = replication_rng(config.seed, replication)
    data = contaminate(generate_dataset(config, rng), config.contamination, rng)
    results = []
    for method in methods:
        label = method.label
        try:
            fit, q = _fit_one(data, config.ar_order, method, control, grid, level)
        except ArlqError as exc:
            results.append(ReplicationResult(replication, label, False, error=str(exc)))
            continue
        if not fit.converged or fit.degenerate:
            why = "did not converge" if not fit.converged else "degenerate fit"
            results.append(ReplicationResult(replication, label, False, q=q,
                                             iterations=fit.iterations, error=why))
            continue
        summary = _summarise(fit, data, level)
        results.append(ReplicationResult(
            replication, label, True, q=q,
            sigma_corrected=float(np.sqrt(fit.params.sigma2 / q)),
            iterations=fit.iterations, **summary))
    return results


@dataclass
class ParameterSummary:
    name: str
    true: float
    mean: float
    bias: float
    rmse: float
    mean_se: float
    sd: float
    mean_ci_lower: float
    mean_ci_upper: float


@dataclass
class MethodSummary:
    method: str
    n_ok: int
    n_failed: int
    mean_q: float
    parameters: list[ParameterSummary]

    def parameter(self, name: str) -> ParameterSummary:
        for par in self.parameters:
            if par.name == name:
                return par
        raise KeyError(name)


@dataclass
class MonteCarloReport:
    config: ScenarioConfig
    methods: list[MethodSummary]
    replications: list[ReplicationResult] = field(repr=False)

    def method(self, label: str) -> MethodSummary:
        for m in self.methods:
            if m.method == label:
                return m
        raise KeyError(label)


def parameter_names(n_beta: int, n_phi: int) -> list[str]:
    return ([f"beta{i}" for i in range(1, n_beta + 1)]
            + [f"phi{j}" for j in range(1, n_phi + 1)] + ["sigma"])


def _nanmean(values: FloatArray) -> float:
    values = values[np.isfinite(values)]
    return float(values.mean()) if values.size else float("nan")


def aggregate(config: ScenarioConfig, methods: Sequence[Method],
              results: Sequence[ReplicationResult]) -> MonteCarloReport:
    """Bias, RMSE, mean SE, SD and mean CI per parameter and method.

    Failed replications are excluded from the aggregates and counted.
    """
    names = parameter_names(len(config.beta_true), len(config.phi_true))
    truth = config.true_values
    summaries = []
    for method in methods:
        rows = sorted((r for r in results if r.method == method.label),
                      key=lambda r: r.replication)
        ok = [r for r in rows if r.ok]
        if ok:
            est = np.array([r.estimate for r in ok])
            se = np.array([r.se for r in ok])
            lo = np.array([r.ci_lower for r in ok])
            hi = np.array([r.ci_upper for r in ok])
        else:
            est = se = lo = hi = np.full((0, len(names)), np.nan)
        pars = []
        for j, name in enumerate(names):
            if ok:
                err = est[:, j] - truth[j]
                mean = float(est[:, j].mean())
                bias = float(err.mean())
                rmse = float(np.sqrt(np.mean(err * err)))
                sd = float(est[:, j].std(ddof=1)) if len(ok) > 1 else 0.0
            else:
                mean = bias = rmse = sd = float("nan")
            pars.append(ParameterSummary(
                name, float(truth[j]), mean, bias, rmse, _nanmean(se[:, j]), sd,
                _nanmean(lo[:, j]), _nanmean(hi[:, j])))
        mean_q = float(np.mean([r.q for r in ok])) if ok else float("nan")
        summaries.append(MethodSummary(method.label, len(ok), len(rows) - len(ok),
                                       mean_q, pars))
        if len(rows) > len(ok):
            logger.warning("%s: %d of %d replications failed and were excluded",
                           method.label, len(rows) - len(ok), len(rows))
    ordered = sorted(results, key=lambda r: (r.replication, r.method))
    return MonteCarloReport(config, summaries, ordered)


def _replication_task(args: tuple) -> list[ReplicationResult]:
    return run_replication(*args)


def run_study(config: ScenarioConfig, methods: Sequence[Method | str],
              control: SolverControl | None = None, jobs: int = 1,
              grid: ArrayLike | None = None, level: float = 0.95) -> MonteCarloReport:
    """Run ``config.replications`` independent replications and aggregate them.

    ``jobs > 1`` distributes replications over worker processes; the report
    is identical to a serial run.
    """
    methods = [Method.parse(m) for m in methods]
    if not methods:
        raise ConfigError("methods", "at least one method is required")
    control = control or SolverControl()
    grid = None if grid is None else list(np.asarray(grid, dtype=float))
    tasks = [(config, r, methods, control, grid, level)
             for r in range(config.replications)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_replication_task, tasks,
                                   chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        chunks = [_replication_task(t) for t in tasks]
    results = [r for chunk in chunks for r in chunk]
    return aggregate(config, methods, results)
