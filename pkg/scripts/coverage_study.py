"""Pointwise bootstrap coverage of beta(s) under the log-normal linear model.

Usage: python3 scripts/coverage_study.py [--reps 100] [--n 200] [--B 200] [--jobs 1]
Prints coverage at a few s values and the mean interval width.
"""

import argparse

import numpy as np

from funaft.fitter import fit_lfaft
from funaft.predict import bootstrap_ci
from funaft.simulate import Dgp, SimulationConfig, simulate_dgp, true_beta


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--B", type=int, default=200)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=606)
    args = ap.parse_args()

    s_check = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    hits = np.zeros(s_check.size)
    widths = []
    lams = []
    seeds = np.random.SeedSequence(args.seed).spawn(args.reps)
    for r in range(args.reps):
        sim = simulate_dgp(SimulationConfig(Dgp.LFAFT_LOGNORMAL, n=args.n, p=100), seed=seeds[r])
        model = fit_lfaft(sim.data)
        ci = bootstrap_ci(model, sim.data, B=args.B, seed=r, jobs=args.jobs)
        idx = [int(np.argmin(np.abs(ci.s_grid - s))) for s in s_check]
        truth = true_beta(s_check)
        hits += (ci.lower95[idx] <= truth) & (truth <= ci.upper95[idx])
        widths.append(ci.upper95[idx] - ci.lower95[idx])
        lams.append(model.lam)
    print(f"{args.reps} replicates, n={args.n}, B={args.B}")
    for s, c, w in zip(s_check, hits / args.reps, np.mean(widths, axis=0)):
        print(f"  s={s:.2f}  coverage {c:.2f}  mean width {w:.4f}")
    print(f"  selected lambda: median {np.median(lams):.3g}, at upper grid edge {np.mean(np.isclose(lams, 1e4)):.0%}")


if __name__ == "__main__":
    main()
