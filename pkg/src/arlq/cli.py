"""Command-line front end: ``arlq fit``, ``arlq select-q`` and ``arlq simulate``.

Exit codes: 0 success, 2 non-convergence, 3 input or configuration error,
4 numerical failure (singular system, collapsed weights, no usable q).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .cml import SolverControl, cml_fit
from .cmlq import ira_fit
from .exceptions import (
    ArlqError,
    ConfigError,
    DegenerateWeightsError,
    DimensionError,
    DomainError,
    InferenceUnavailableError,
    NoValidQError,
    ParseError,
    SingularityError,
)
from .inference import asymptotic_report
from .io import (
    CsvSchema,
    belgium_path,
    bundled_config,
    dumps,
    file_digest,
    load_config,
    load_csv,
    monte_carlo_to_dict,
    write_table,
)
from .qselect import DEFAULT_GRID, QSearchResult, raic, select_q
from .simulation import Method, ScenarioConfig, parameter_names, run_study

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

logger = logging.getLogger("arlq")

BUNDLED = {"@belgium": belgium_path}
VARIANCE_STEPS = ("weighted-mean", "scaled")


def parse_grid(text: str | None) -> np.ndarray:
    """``start:stop:step`` (inclusive) or a comma list; ``None`` gives the default grid."""
    if text is None:
        return DEFAULT_GRID
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            count = int(round((stop - start) / step)) + 1
            return np.round(start + step * np.arange(count), 10)
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise ConfigError("--grid", f"cannot parse {text!r}") from None


def _input_path(text: str) -> Path:
    return BUNDLED[text]() if text in BUNDLED else Path(text)


def _schema(args: argparse.Namespace) -> CsvSchema:
    if args.input in BUNDLED:
        return CsvSchema(args.response or "calls",
                         tuple(args.covariates or ["year"]), args.intercept,
                         args.delimiter)
    if not args.response or not args.covariates:
        raise ConfigError("--response/--covariates", "both are required for a file input")
    return CsvSchema(args.response, tuple(args.covariates), args.intercept,
                     args.delimiter)


def _control(args: argparse.Namespace) -> SolverControl:
    return SolverControl(epsilon=args.epsilon, max_iterations=args.max_iter,
                         variance_step=args.variance_step.replace("-", "_"))


def _method_block(label: str, fit: Any, data: Any, level: float,
                  names: Sequence[str]) -> dict[str, Any]:
    block: dict[str, Any] = {
        "method": label,
        "q": float(fit.q),
        "converged": bool(fit.converged),
        "degenerate": bool(fit.degenerate),
        "iterations": int(fit.iterations),
        "stationary": bool(fit.stationary),
        "sigma2": fit.params.sigma2,
        "sigma2_surrogate_corrected": fit.params.sigma2 / fit.q,
        "variance_step": getattr(fit, "variance_step", None),
        "objective": fit.lq_value,
    }
    try:
        block["raic"] = raic(fit, data)
    except ArlqError as exc:
        block["raic"] = None
        block["raic_error"] = str(exc)
    est = [*fit.params.beta, *fit.params.phi, fit.params.sigma]
    se = lo = hi = [float("nan")] * len(est)
    try:
        rep = asymptotic_report(fit, data, level)
        se = [*rep.se[:-1], rep.se_sigma]
        lo = [*rep.ci_lower[:-1], rep.sigma_ci[0]]
        hi = [*rep.ci_upper[:-1], rep.sigma_ci[1]]
        block["covariance"] = rep.covariance
    except ArlqError as exc:
        block["inference_error"] = str(exc)
    block["parameters"] = [
        {"name": n, "estimate": e, "se": s, "ci_lower": a, "ci_upper": b}
        for n, e, s, a, b in zip(names, est, se, lo, hi)]
    return block


def _param_names(data: Any, p: int) -> list[str]:
    betas = [f"beta_{n}" for n in data.names] if data.names else \
        parameter_names(data.n_covariates, 0)[:-1]
    return [*betas, *[f"phi{j}" for j in range(1, p + 1)], "sigma"]


def _provenance(args: argparse.Namespace, path: Path, extra: dict[str, Any]) -> dict[str, Any]:
    return {"tool": "arlq", "version": __version__,
            "input": {"path": str(args.input), "sha256": file_digest(path)},
            "config": extra}


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _sidecar(output: str | None, suffix: str) -> Path | None:
    if not output:
        return None
    out = Path(output)
    return out.with_name(out.stem + suffix)


def cmd_fit(args: argparse.Namespace) -> int:
    path = _input_path(args.input)
    data = load_csv(path, _schema(args))
    control = _control(args)
    p = args.ar_order
    names = _param_names(data, p)
    search: QSearchResult | None = None
    if args.method == "cml":
        fit = cml_fit(data, p, control)
    elif args.q == "auto":
        search = select_q(data, p, parse_grid(args.grid), control)
        fit = search.fit_at_q_star
    else:
        fit = ira_fit(data, p, float(args.q), control)
    label = args.method if args.method == "cml" else f"cmlq:{args.q}"
    block = _method_block(label, fit, data, args.level, names)
    if search is not None:
        block["q_star"] = search.q_star
        block["raic_curve"] = [list(pt) for pt in search.raic_curve]
    report = {
        "provenance": _provenance(args, path, {
            "ar_order": p, "method": args.method, "q": args.q,
            "level": args.level, "epsilon": args.epsilon,
            "max_iter": args.max_iter, "intercept": args.intercept,
            "variance_step": args.variance_step}),
        "results": [block],
    }
    _emit(dumps(report), args.output)
    table = _sidecar(args.output, ".table.csv")
    if table is not None:
        write_table(table, ["parameter", "Estimates", "SE", "CIL", "CIU"],
                    [[r["name"], r["estimate"], r["se"], r["ci_lower"], r["ci_upper"]]
                     for r in block["parameters"]])
    if not fit.converged:
        logger.error("fit did not converge after %d iterations", fit.iterations)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_select_q(args: argparse.Namespace) -> int:
    path = _input_path(args.input)
    data = load_csv(path, _schema(args))
    res = select_q(data, args.ar_order, parse_grid(args.grid), _control(args))
    payload = {
        "provenance": _provenance(args, path, {"ar_order": args.ar_order,
                                               "grid": args.grid,
                                               "variance_step": args.variance_step}),
        "q_star": res.q_star,
        "raic_star": res.raic_star,
        "raic_curve": [list(pt) for pt in res.raic_curve],
        "failures": {format(q, "g"): why for q, why in sorted(res.failures.items())},
        "fit_at_q_star": _method_block(f"cmlq:{res.q_star:g}", res.fit_at_q_star,
                                       data, args.level, _param_names(data, args.ar_order)),
    }
    _emit(dumps(payload), args.output)
    curve = _sidecar(args.output, ".curve.csv")
    if curve is not None:
        write_table(curve, ["q", "raic"], res.raic_curve)
    return EXIT_OK


_RUN_KEYS = ("methods", "grid", "epsilon", "max_iterations", "level", "variance_step")


def cmd_simulate(args: argparse.Namespace) -> int:
    config_path = (bundled_config(args.config[1:]) if args.config.startswith("@")
                   else Path(args.config))
    raw = load_config(config_path)
    run = {k: raw.pop(k) for k in _RUN_KEYS if k in raw}
    if args.seed is not None:
        raw["seed"] = args.seed
    config = ScenarioConfig.from_dict(raw)
    methods = [Method.parse(m) for m in run.get("methods", ["cml", "cmlq:auto"])]
    grid = run.get("grid")
    if isinstance(grid, str):
        grid = parse_grid(grid)
    step = str(run.get("variance_step", args.variance_step)).replace("-", "_")
    if step not in ("weighted_mean", "scaled"):
        raise ConfigError("variance_step", f"must be weighted-mean or scaled, got {step!r}")
    control = SolverControl(epsilon=float(run.get("epsilon", args.epsilon)),
                            max_iterations=int(run.get("max_iterations", args.max_iter)),
                            variance_step=step)
    level = float(run.get("level", args.level))
    report = run_study(config, methods, control, jobs=args.jobs, grid=grid, level=level)
    payload = monte_carlo_to_dict(report)
    payload["run"] = {"methods": [m.label for m in methods],
                      "grid": None if grid is None else list(map(float, grid)),
                      "epsilon": control.epsilon,
                      "max_iterations": control.max_iterations, "level": level,
                      "variance_step": control.variance_step}
    payload["provenance"] = {"tool": "arlq", "version": __version__,
                             "config": args.config,
                             "config_sha256": file_digest(config_path)}
    _emit(dumps(payload), args.output)

    table = _sidecar(args.output, ".table.csv")
    if table is not None:
        write_table(table, ["method", "q", "parameter", "Estimates", "Bias", "RMSE",
                            "SE", "CIL", "CIU"],
                    [[m.method, m.mean_q, p.name, p.mean, p.bias, p.rmse, p.mean_se,
                      p.mean_ci_lower, p.mean_ci_upper]
                     for m in report.methods for p in m.parameters])
    reps = _sidecar(args.output, ".replications.csv")
    if reps is not None:
        names = parameter_names(len(config.beta_true), len(config.phi_true))
        write_table(reps, ["replication", "method", "ok", "q", *names],
                    [[r.replication, r.method, int(r.ok), r.q,
                      *(r.estimate or [float("nan")] * len(names))]
                     for r in report.replications])
    for m in report.methods:
        if m.n_failed:
            logger.warning("%s: %d replications failed", m.method, m.n_failed)
    return EXIT_OK


def _q_arg(text: str) -> str:
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"q must be a number or 'auto', got {text!r}")
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"q must lie in (0, 1], got {value}")
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arlq",
        description="CML and robust CMLq estimation of regression with AR(p) errors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_fit(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--input", required=True,
                        help="delimited file with a header row, or @belgium")
        sp.add_argument("--response")
        sp.add_argument("--covariates", nargs="+")
        sp.add_argument("--intercept", action=argparse.BooleanOptionalAction, default=True)
        sp.add_argument("--delimiter", default=",")
        sp.add_argument("-p", "--ar-order", type=int, default=1)
        sp.add_argument("--grid", help="q grid as start:stop:step or a comma list")
        sp.add_argument("--level", type=float, default=0.95)
        sp.add_argument("--epsilon", type=float, default=1e-8)
        sp.add_argument("--max-iter", type=int, default=500)
        sp.add_argument("--variance-step", choices=VARIANCE_STEPS, default="weighted-mean",
                        help="robust variance update; scaled multiplies by q")
        sp.add_argument("--output", help="report path (default: stdout)")

    fit = sub.add_parser("fit", help="fit one dataset")
    common_fit(fit)
    fit.add_argument("--method", choices=("cml", "cmlq"), default="cml")
    fit.add_argument("--q", type=_q_arg, default="auto")
    fit.set_defaults(func=cmd_fit)

    sq = sub.add_parser("select-q", help="robust AIC curve over a q grid")
    common_fit(sq)
    sq.set_defaults(func=cmd_select_q)

    sim = sub.add_parser("simulate", help="Monte Carlo study from a config file")
    sim.add_argument("--config", required=True,
                     help="YAML or JSON scenario file, or @name for a bundled one")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--level", type=float, default=0.95)
    sim.add_argument("--epsilon", type=float, default=1e-8)
    sim.add_argument("--max-iter", type=int, default=500)
    sim.add_argument("--variance-step", choices=VARIANCE_STEPS, default="weighted-mean")
    sim.add_argument("--output", help="report path (default: stdout)")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="arlq: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ParseError, ConfigError, DimensionError, DomainError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except (SingularityError, DegenerateWeightsError, InferenceUnavailableError,
            NoValidQError) as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    except ArlqError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
