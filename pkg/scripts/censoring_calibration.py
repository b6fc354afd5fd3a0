"""Empirical censoring rate against the uniform censoring bound u.

Usage: python3 scripts/censoring_calibration.py [--n 10000]
"""

import argparse

from funaft.simulate import Dgp, SimulationConfig, simulate_dgp


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    grid = {
        Dgp.LFAFT_LOGNORMAL: (100, 250, 500),
        Dgp.LFAFT_LOGLOGISTIC: (100, 250, 500),
        Dgp.COX_LINEAR: (100, 250, 500),
        Dgp.AFAFT_LOGNORMAL: (500, 2000, 5000),
        Dgp.COX_ADDITIVE: (500, 2000, 5000),
    }
    print(f"{'dgp':20s} {'u':>6s} {'censored':>9s}")
    for dgp, us in grid.items():
        for u in us:
            sim = simulate_dgp(SimulationConfig(dgp, n=args.n, p=100, u=u), seed=args.seed)
            mark = "  <- default" if u == dgp.default_u else ""
            print(f"{dgp.value:20s} {u:6.0f} {sim.censoring_rate:9.3f}{mark}")


if __name__ == "__main__":
    main()
