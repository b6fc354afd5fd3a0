"""Run a simulation study from a YAML config and print the summary table.

Usage: python3 scripts/simulation_study.py [scripts/study_desk.yaml] [--replicates R] [--jobs J] [--out results.csv]
The CLI equivalent is ``funaft study --config ... --out ...``.
"""

import argparse
import math

from funaft.cli import load_study_config
from funaft.metrics import MetricWindow
from funaft.simulate import ESTIMATORS, expand_scenarios, run_study, summarize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default="scripts/study_desk.yaml")
    ap.add_argument("--replicates", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    cfg = load_study_config(args.config)
    configs = [c for sc in cfg["scenarios"] for c in expand_scenarios(sc)]
    rows = run_study(
        configs,
        args.replicates or int(cfg.get("replicates", 10)),
        cfg.get("estimators", list(ESTIMATORS)),
        seed=int(cfg.get("seed", 0)),
        jobs=args.jobs,
        window=MetricWindow(**cfg.get("window", {})),
        out_path=args.out,
        fit_kwargs=dict(cfg.get("fit", {})),
    )

    def f(x, fmt):
        return "-" if not math.isfinite(x) else format(x, fmt)

    print(f"{'dgp':18s} {'n':>5s} {'estimator':18s} {'ok':>3s} {'logMISE b':>10s} {'logMISE S':>10s} {'Brier':>7s} {'sec':>6s}")
    for r in summarize(rows):
        print(
            f"{r['dgp']:18s} {r['n']:5d} {r['estimator']:18s} {r['n_ok']:3d} "
            f"{f(r['log_mise_beta_median'], '10.3f')} {f(r['log_mise_surv_median'], '10.3f')} "
            f"{f(r['brier_median'], '7.4f')} {f(r['fit_seconds_median'], '6.2f')}"
        )


if __name__ == "__main__":
    main()
