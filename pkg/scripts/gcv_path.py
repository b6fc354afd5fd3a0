"""Print the GCV path of one fit: lambda, df, unpenalized log-likelihood, GCV.

Usage: python3 scripts/gcv_path.py [--dgp lfaft_lognormal] [--n 200]
       [--lambda-min 1] [--lambda-max 1e4] [--grid 20]
"""

import argparse

from funaft.fitter import fit_afaft, fit_lfaft
from funaft.simulate import Dgp, SimulationConfig, simulate_dgp


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dgp", default="lfaft_lognormal", choices=[d.value for d in Dgp])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lambda-min", type=float, default=1.0)
    ap.add_argument("--lambda-max", type=float, default=1e4)
    ap.add_argument("--grid", type=int, default=20)
    args = ap.parse_args()

    dgp = Dgp(args.dgp)
    sim = simulate_dgp(SimulationConfig(dgp, n=args.n, p=100), seed=args.seed)
    fit = fit_lfaft if dgp.linear else fit_afaft
    model = fit(sim.data, grid_size=args.grid, lam_range=(args.lambda_min, args.lambda_max))
    print(f"{'lambda':>10s} {'df':>8s} {'loglik':>12s} {'gcv':>10s}")
    for row in model.gcv_path:
        star = " *" if row["lambda"] == model.lam else ""
        print(f"{row['lambda']:10.4g} {row['df']:8.3f} {row['loglik']:12.3f} {row['gcv']:10.5f}{star}")
    if model.lambda_at_boundary:
        print("selected lambda is at the edge of the grid")


if __name__ == "__main__":
    main()
