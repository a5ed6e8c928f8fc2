"""Worst-case pseudo-regret on the Bernoulli lower-bound environments.

Fits the log-log slope in K at each n and in n at each K, and writes the grid
to CSV.

    python3 scripts/lower_bound_scaling.py --k 2 4 8 16 32 --n 8192
"""

import argparse
from pathlib import Path

from adastrat.adversary import scaling_experiment
from adastrat.cli import ExperimentReport, emit_csv
from adastrat.rng import DEFAULT_SEED


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, nargs="+", default=[2, 4, 8, 16, 32])
    ap.add_argument("--n", type=int, nargs="+", default=[2**13])
    ap.add_argument("--algo", choices=("mcucb", "uniform", "oracle"), default="mcucb")
    ap.add_argument("--env-samples", type=int, default=16)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--out", type=Path, default=Path("results/lower_bound.csv"))
    args = ap.parse_args()

    rep = scaling_experiment(args.k, args.n, algo=args.algo, env_samples=args.env_samples,
                             reps=args.reps, master_seed=args.seed)
    report = ExperimentReport("lower-bound", args.seed, ["K", "n", "worst_regret", "stderr", "n_envs"])
    for e in rep.entries:
        report.add(K=e.K, n=e.n, worst_regret=e.worst_regret, stderr=e.stderr, n_envs=e.n_envs)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    emit_csv(report, args.out)
    for n, fit in rep.k_slopes.items():
        print(f"n={n}: K-slope {fit.slope:.4f}")
    for K, fit in rep.n_slopes.items():
        print(f"K={K}: n-slope {fit.slope:.4f}")


if __name__ == "__main__":
    main()
