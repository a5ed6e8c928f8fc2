"""Mean MC-UCB pseudo-regret against the budget on a fixed partition.

    python3 scripts/n_scaling.py --env heteroscedastic-ramp --k 4 --runs 2000
"""

import argparse
from pathlib import Path

from adastrat.adversary import scaling_fit
from adastrat.allocate import McUcbParams, PartitionSampler, run_batch
from adastrat.cli import ExperimentReport, emit_csv
from adastrat.metrics import partition_truth, pseudo_regret
from adastrat.model import builtin_env
from adastrat.partition import make_hypercubic
from adastrat.rng import DEFAULT_SEED, stream


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--env", default="heteroscedastic-ramp")
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--n", type=int, nargs="+", default=[2**j for j in range(8, 14)])
    ap.add_argument("--runs", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--out", type=Path, default=Path("results/n_scaling.csv"))
    args = ap.parse_args()

    env = builtin_env(args.env)
    p = make_hypercubic(1, args.k)
    _, sig = partition_truth(env, p)
    sampler = PartitionSampler(env, p)
    params = McUcbParams(b=env.b, f_max=env.declared.f_max)
    report = ExperimentReport("scaling", args.seed, ["n", "K", "regret_mean", "regret_stderr"])
    means = []
    for n in args.n:
        res = run_batch("mcucb", sampler, n, [stream(args.seed, n, r) for r in range(args.runs)], params=params)
        reg = pseudo_regret(p.weights, sig, res.counts)
        means.append(float(reg.mean()))
        report.add(n=n, K=args.k, regret_mean=means[-1], regret_stderr=float(reg.std(ddof=1) / args.runs**0.5))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    emit_csv(report, args.out)
    print(f"n-slope {scaling_fit(args.n, means).slope:.4f}")


if __name__ == "__main__":
    main()
