"""Command-line front end.

Subcommands write plain CSV/JSON so any plotting tool can consume them.
Exit codes: 0 on success, 2 on invalid input, 3 when the optimizer did not
converge (the model file is still written and flagged).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .basis import BasisConfigError
from .dataset import DatasetError, load_dataset, write_dataset
from .design import DesignError
from .fitter import FitError, FittedModel, fit_afaft, fit_lfaft
from .likelihood import Family
from .metrics import MetricWindow
from .predict import InferenceError, bootstrap_ci, coef_curve, coef_surface, survival_matrix, wald_ci
from .simulate import (
    ESTIMATORS,
    SUMMARY_COLUMNS,
    Dgp,
    SimulationConfig,
    expand_scenarios,
    run_study,
    simulate_dgp,
    summarize,
)

log = logging.getLogger("funaft")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3

# errors that mean "the inputs are wrong" rather than "the code is wrong"
_VALIDATION_ERRORS = (
    DatasetError,
    DesignError,
    BasisConfigError,
    FitError,
    InferenceError,
    ValueError,
    TypeError,
    KeyError,
    FileNotFoundError,
)


class UsageError(ValueError):
    pass


def parse_t_grid(text: str) -> np.ndarray:
    """``start:stop:num`` to an even grid, e.g. ``0:120:121``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--t-grid must look like start:stop:num, got {text!r}")
    try:
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--t-grid must look like start:stop:num, got {text!r}") from None
    if num < 1 or start < 0 or (num > 1 and stop <= start):
        raise UsageError(f"--t-grid needs 0 <= start < stop and num >= 1, got {text!r}")
    return np.linspace(start, stop, num)


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("FUNAFT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"FUNAFT_SEED must be an integer, got {env!r}") from None


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def _sibling(path: Path, suffix: str) -> Path:
    """``out/model.json`` + ``coef`` -> ``out/model.coef.csv``."""
    return path.with_name(f"{path.stem}.{suffix}.csv")


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(args) -> int:
    if not 0 < args.lambda_min < args.lambda_max:
        raise UsageError("need 0 < --lambda-min < --lambda-max")
    lam_range = (args.lambda_min, args.lambda_max)
    data = load_dataset(args.subjects, args.functional)
    if args.model == "lfaft":
        model = fit_lfaft(
            data, args.family, K=args.k, quadrature=args.quadrature,
            grid_size=args.lambda_grid, center_x=args.center_x, lam_range=lam_range,
        )
    else:
        model = fit_afaft(
            data, args.family, K_S=args.ks, K_X=args.kx, quadrature=args.quadrature,
            grid_size=args.lambda_grid, center_x=args.center_x, lam_range=lam_range,
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    if model.model == "lfaft":
        curve = coef_curve(model)
        _write_csv(
            _sibling(out, "coef"),
            ["s", "beta_hat", "lo", "hi"],
            ([_fmt(s), _fmt(b), "", ""] for s, b in zip(curve.s_grid, curve.beta_hat)),
        )
    else:
        surf = coef_surface(model)
        _write_csv(
            _sibling(out, "coef"),
            ["s", "x", "F_hat"],
            (
                [_fmt(s), _fmt(x), _fmt(surf.F_hat[i, j])]
                for i, s in enumerate(surf.s_grid)
                for j, x in enumerate(surf.x_grid)
            ),
        )
    _write_csv(
        _sibling(out, "gcv"),
        ["lambda", "gcv", "df", "loglik", "converged"],
        ([_fmt(r["lambda"]), _fmt(r["gcv"]), _fmt(r["df"]), _fmt(r["loglik"]), int(r["converged"])] for r in model.gcv_path),
    )
    log.info("lambda=%g df=%.3f sigma=%.4f", model.lam, model.df, model.params.sigma)
    if model.lambda_at_boundary:
        print(
            f"note: GCV minimum is at the edge of the lambda grid ({model.lam:g}); "
            "consider widening --lambda-min/--lambda-max",
            file=sys.stderr,
        )
    if not model.converged:
        print(f"warning: optimizer did not converge at lambda={model.lam:g}; model written to {out}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _load_model(path) -> FittedModel:
    try:
        return FittedModel.load(path)
    except (json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"{path}: not a fitted model file ({exc})") from None


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    data = load_dataset(args.subjects, args.functional)
    t = parse_t_grid(args.t_grid)
    S = survival_matrix(model, data, t, clamp_x=args.clamp_x)
    _write_csv(
        args.out,
        ["id", "t", "s_hat"],
        ([sid, _fmt(tt), _fmt(S[i, j])] for i, sid in enumerate(data.ids) for j, tt in enumerate(t)),
    )
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    model = _load_model(args.model)
    data = load_dataset(args.subjects, args.functional)
    if args.wald:
        curve = wald_ci(model, data)
    else:
        if args.b < 50:
            raise UsageError(f"--b must be at least 50, got {args.b}")
        curve = bootstrap_ci(model, data, B=args.b, seed=resolve_seed(args.seed), jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out,
        ["s", "beta_hat", "lo", "hi"],
        ([_fmt(s), _fmt(b), _fmt(lo), _fmt(hi)] for s, b, lo, hi in zip(curve.s_grid, curve.beta_hat, curve.lower95, curve.upper95)),
    )
    _write_csv(
        _sibling(out, "params"),
        ["name", "estimate", "lo", "hi", "method"],
        ([name, _fmt(e), _fmt(lo), _fmt(hi), curve.method] for name, (e, lo, hi) in curve.intervals.items()),
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        dgp = Dgp(args.dgp)
    except ValueError:
        raise UsageError(f"unknown DGP {args.dgp!r}; valid names: {', '.join(d.value for d in Dgp)}") from None
    seed = resolve_seed(args.seed)
    cfg = SimulationConfig(dgp, args.n, args.p, u=args.u, seed=seed)
    sim = simulate_dgp(cfg)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    subjects = prefix.with_name(prefix.name + "_subjects.csv")
    functional = prefix.with_name(prefix.name + "_functional.csv")
    write_dataset(sim.data, subjects, functional)
    prefix.with_name(prefix.name + "_truth.json").write_text(
        json.dumps(sim.truth_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    log.info("censoring rate %.3f", sim.censoring_rate)
    return EXIT_OK


def load_study_config(path) -> dict:
    import yaml

    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(cfg, dict) or "scenarios" not in cfg:
        raise UsageError(f"{path}: study config needs a 'scenarios' list")
    return cfg


def cmd_study(args) -> int:
    cfg = load_study_config(args.config)
    configs = []
    for i, sc in enumerate(cfg["scenarios"]):
        try:
            configs.extend(expand_scenarios(sc))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"{args.config}: scenario {i + 1}: {exc}") from None
    estimators = cfg.get("estimators", list(ESTIMATORS))
    replicates = args.replicates if args.replicates is not None else int(cfg.get("replicates", 10))
    seed = args.seed if args.seed is not None else cfg.get("seed")
    seed = resolve_seed(seed)
    window = MetricWindow(**cfg.get("window", {}))
    fit_kwargs = dict(cfg.get("fit", {}))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = run_study(
        configs, replicates, estimators, seed=seed, jobs=args.jobs, window=window,
        out_path=out, record_timing=not args.no_timing, fit_kwargs=fit_kwargs,
    )
    summary = summarize(rows)
    _write_csv(
        _sibling(out, "summary"),
        list(SUMMARY_COLUMNS),
        ([r[c] if not isinstance(r[c], float) else _fmt(r[c]) for c in SUMMARY_COLUMNS] for r in summary),
    )
    n_fail = sum(not math.isfinite(r["mise_surv"]) for r in rows)
    if n_fail:
        log.warning("%d of %d fits failed; see the results file", n_fail, len(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _family(text: str) -> Family:
    try:
        return Family.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="funaft", description="Functional accelerated failure time models.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--subjects", required=True, help="CSV with id,time,status[,scalars...]")
        sp.add_argument("--functional", required=True, help="CSV with id,s,x")

    f = sub.add_parser("fit", help="fit a model and write JSON plus coefficient and GCV CSVs")
    data_args(f)
    f.add_argument("--model", choices=("lfaft", "afaft"), default="lfaft")
    f.add_argument("--family", type=_family, default=Family.LOG_NORMAL, help="lognormal or loglogistic")
    f.add_argument("--k", type=int, default=20, help="basis size for beta(s)")
    f.add_argument("--ks", type=int, default=10, help="s-direction basis size for F(s, x)")
    f.add_argument("--kx", type=int, default=10, help="x-direction basis size for F(s, x)")
    f.add_argument("--quadrature", choices=("auto", "riemann", "trapezoid"), default="auto")
    f.add_argument("--lambda-grid", type=int, default=20, help="number of log-spaced smoothing values")
    f.add_argument("--lambda-min", type=float, default=1.0, help="smallest smoothing value")
    f.add_argument("--lambda-max", type=float, default=1e4, help="largest smoothing value")
    f.add_argument("--center-x", action="store_true", help="subtract the pointwise mean curve first")
    f.add_argument("--out", required=True, help="model JSON path; CSVs are written next to it")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="predicted survival curves")
    pr.add_argument("--model", required=True)
    data_args(pr)
    pr.add_argument("--t-grid", default="0:120:121", help="start:stop:num")
    pr.add_argument("--clamp-x", action="store_true", help="clamp curve values outside the training range")
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    b = sub.add_parser("bootstrap", help="pointwise intervals for beta(s) and parameter intervals")
    b.add_argument("--model", required=True)
    data_args(b)
    b.add_argument("--b", type=int, default=2000, help="number of resamples (>= 50)")
    b.add_argument("--seed", type=int, default=None, help="defaults to $FUNAFT_SEED, then 0")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--wald", action="store_true", help="Wald intervals instead of the bootstrap")
    b.add_argument("--out", required=True, help="curve CSV; parameter intervals go to <stem>.params.csv")
    b.set_defaults(func=cmd_bootstrap)

    s = sub.add_parser("simulate", help="draw one dataset from a data-generating model")
    s.add_argument("--dgp", required=True, help=", ".join(d.value for d in Dgp))
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--p", type=int, default=100)
    s.add_argument("--u", type=float, default=None, help="censoring bound (default per model)")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_simulate)

    st = sub.add_parser("study", help="run a simulation study from a YAML config")
    st.add_argument("--config", required=True)
    st.add_argument("--replicates", type=int, default=None)
    st.add_argument("--jobs", type=int, default=1)
    st.add_argument("--seed", type=int, default=None)
    st.add_argument("--no-timing", action="store_true", help="leave fit_seconds empty so output is reproducible")
    st.add_argument("--out", required=True, help="results CSV; summary goes to <stem>.summary.csv")
    st.set_defaults(func=cmd_study)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
