"""MSE of MC-UCB and uniform stratification against K for the Asian call.

Writes one CSV per budget and prints the minimising K of each curve.

    python3 scripts/asian_ucurve.py --n 200 2000 --reps 10000 --out results/
"""

import argparse
from pathlib import Path

from adastrat.cli import ASIAN_COLUMNS, ExperimentReport, asian_sweep, emit_csv
from adastrat.rng import DEFAULT_SEED


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[200, 2000])
    ap.add_argument("--k-max", type=int, default=50)
    ap.add_argument("--reps", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for n in args.n:
        rep = ExperimentReport("asian", args.seed, ASIAN_COLUMNS)
        rows = asian_sweep(n, range(1, args.k_max + 1), args.reps, args.seed)
        for row in rows:
            row.pop("squared_errors")
            rep.add(**row)
        path = args.out / f"asian_n{n}.csv"
        emit_csv(rep, path)
        for algo in ("mcucb", "uniform"):
            best = min((r for r in rows if r["algo"] == algo), key=lambda r: r["mse"])
            print(f"n={n} {algo}: argmin K={best['K']} mse={best['mse']:.5f} -> {path}")


if __name__ == "__main__":
    main()
