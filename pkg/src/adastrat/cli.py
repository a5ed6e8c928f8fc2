"""Command-line experiment harness.

Every subcommand writes one CSV report: a ``# seed=<seed> version=<v>``
comment line, a header row, then data rows with floats printed to 17
significant digits.  Repetition ``r`` draws from ``stream(seed, r)`` (or
``stream(seed, K, r)`` in sweeps over K), so a report depends only on the
configuration and the seed.  ``ADASTRAT_WORKERS`` sets the number of worker
processes and never changes the output.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import scaling_experiment, scaling_fit
from .allocate import (
    McUcbParams,
    PartitionSampler,
    fixed_plan,
    mcucb_plan,
    oracle_counts,
    run_plans,
    uniform_counts,
)
from .concentration import coverage_test
from .errors import AdastratError, ConfigurationError
from .finance import REFERENCE_PRICE, AsianOptionSpec, asian_environment
from .metrics import (
    QuadratureSpec,
    true_integral,
    lower_bound_shape,
    mcucb_regret_bound,
    partition_truth,
    pseudo_regret,
    quality,
)
from .model import builtin_env, parse_noise
from .partition import make_hypercubic, partition_for_k
from .rng import DEFAULT_SEED, stream
from .select import choose_num_strata

COMMANDS = ("integrate", "sweep-strata", "scaling", "lower-bound", "concentration", "asian")
ALGOS = ("mcucb", "uniform", "oracle", "crude")


# --------------------------------------------------------------------------
# reports and CSV

@dataclass
class ExperimentReport:
    command: str
    seed: int
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, **row) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise ConfigurationError(f"unknown report columns {sorted(unknown)}")
        self.rows.append(row)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            raise ValueError("refusing to write NaN to a report")
        return "%.17g" % v
    s = str(v)
    if any(c in s for c in ",\n\r\""):
        raise ValueError(f"cell {s!r} contains a reserved character")
    return s


def _parse_cell(s: str):
    if s == "":
        return None
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def format_csv(report: ExperimentReport) -> str:
    meta = "".join(f" {k}={_cell(v)}" for k, v in report.meta.items())
    out = io.StringIO()
    out.write(f"# seed={report.seed} version={__version__} command={report.command}{meta}\n")
    out.write(",".join(report.columns) + "\n")
    for row in report.rows:
        out.write(",".join(_cell(row.get(c)) for c in report.columns) + "\n")
    return out.getvalue()


def emit_csv(report: ExperimentReport, path) -> None:
    """Write the report to ``path`` (``"-"`` or ``None`` for stdout)."""
    text = format_csv(report)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def parse_csv(text: str) -> ExperimentReport:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ConfigurationError("missing metadata comment line")
    meta = dict(item.split("=", 1) for item in lines[0][2:].split())
    seed = int(meta.pop("seed"))
    meta.pop("version", None)
    command = meta.pop("command", "")
    columns = lines[1].split(",") if len(lines) > 1 else []
    rep = ExperimentReport(command, seed, columns, meta={k: _parse_cell(v) for k, v in meta.items()})
    for line in lines[2:]:
        cells = line.split(",")
        rep.rows.append({c: _parse_cell(v) for c, v in zip(columns, cells) if v != ""})
    return rep


# --------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    command: str
    seed: int = DEFAULT_SEED
    out: str | None = None
    env: str = "heteroscedastic-ramp"
    dim: int = 1
    noise: str = "gaussian"
    b: float | None = None
    algo: str = "mcucb"
    n: int = 1000
    k: int = 4
    k_grid: tuple[int, ...] = ()
    n_grid: tuple[int, ...] = ()
    auto_k: bool = False
    alpha: float | None = None
    reps: int = 1000
    fmax: float | None = None
    delta: float | None = None
    a_override: float | None = None
    variance: str = "biased"
    trace: bool = False
    env_samples: int = 8
    dist: str = "gaussian"
    trials: int = 10000
    strike: float = 120.0
    algos: tuple[str, ...] = ("mcucb", "uniform")

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.reps < 1:
            raise ConfigurationError("reps must be >= 1")
        if self.algo not in ALGOS:
            raise ConfigurationError(f"unknown algo {self.algo!r}")
        if self.auto_k and self.alpha is None:
            raise ConfigurationError("--auto-k needs --alpha")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")


def _mcucb_params(cfg: ExperimentConfig, env) -> McUcbParams:
    return McUcbParams(
        b=cfg.b if cfg.b is not None else env.b,
        f_max=cfg.fmax if cfg.fmax is not None else env.declared.f_max,
        delta=cfg.delta,
        a_override=cfg.a_override,
        variance=cfg.variance,
    )


INTEGRATE_COLUMNS = [
    "env", "dim", "noise", "algo", "n", "K", "reps", "seed",
    "mean_estimate", "variance", "true_mu", "mse", "mse_stderr",
    "regret_mean", "regret_stderr", "oracle_risk", "quality", "regret_bound",
]


def _integrate_row(cfg, env, K, rngs_for):
    quad = QuadratureSpec()
    part = make_hypercubic(env.dim, 1) if cfg.algo == "crude" else partition_for_k(env.dim, K)
    K = part.K
    n = cfg.n
    sampler = PartitionSampler(env, part)
    _, sig = partition_truth(env, part, quad)
    if cfg.algo == "mcucb":
        plan = mcucb_plan(_mcucb_params(cfg, env), n, K)
    elif cfg.algo == "oracle":
        plan = fixed_plan(oracle_counts(part.weights, sig, n), n, K)
    else:
        plan = fixed_plan(uniform_counts(n, K), n, K)
    res = run_plans(sampler, n, rngs_for(K), [plan])[0]
    mu = true_integral(env, quad)
    e = res.estimates
    se = (e - mu) ** 2
    reg = pseudo_regret(part.weights, sig, res.counts)
    big_sigma = float(np.dot(part.weights, sig))
    bound = None
    if cfg.algo == "mcucb" and n >= 4 * K and cfg.a_override is None:
        p = _mcucb_params(cfg, env)
        bound = mcucb_regret_bound(big_sigma, p.b, p.f_max, K, n)
    R = len(e)
    return dict(
        env=env.name, dim=env.dim, noise=cfg.noise, algo=cfg.algo, n=n, K=K, reps=R, seed=cfg.seed,
        mean_estimate=float(e.mean()),
        variance=float(e.var(ddof=1)) if R > 1 else 0.0,
        true_mu=mu,
        mse=float(se.mean()),
        mse_stderr=float(se.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0,
        regret_mean=float(reg.mean()),
        regret_stderr=float(reg.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0,
        oracle_risk=big_sigma**2 / n,
        quality=quality(env, part, n, quad),
        regret_bound=bound,
    ), res


def _env_of(cfg):
    b = cfg.b
    return builtin_env(cfg.env, cfg.dim, parse_noise(cfg.noise, b))


def _run_integrate(cfg: ExperimentConfig) -> ExperimentReport:
    env = _env_of(cfg)
    rep = ExperimentReport(cfg.command, cfg.seed, INTEGRATE_COLUMNS)
    K = cfg.k
    if cfg.auto_k:
        choice = choose_num_strata(cfg.n, env.dim, cfg.alpha)
        K = choice.k_n
        rep.meta.update(auto_k=K, alpha=cfg.alpha)
    row, _ = _integrate_row(cfg, env, K, lambda K: [stream(cfg.seed, r) for r in range(cfg.reps)])
    rep.add(**row)
    return rep


def _run_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    env = _env_of(cfg)
    rep = ExperimentReport(cfg.command, cfg.seed, INTEGRATE_COLUMNS)
    grid = cfg.k_grid or tuple(l**env.dim for l in (1, 2, 4, 8, 16))
    for K in grid:
        row, _ = _integrate_row(cfg, env, K, lambda K: [stream(cfg.seed, K, r) for r in range(cfg.reps)])
        rep.add(**row)
    return rep


def _run_scaling(cfg: ExperimentConfig) -> ExperimentReport:
    env = _env_of(cfg)
    cols = ["env", "K", "n", "reps", "regret_mean", "regret_stderr", "regret_bound", "n_slope"]
    rep = ExperimentReport(cfg.command, cfg.seed, cols)
    grid = cfg.n_grid or tuple(2**j for j in range(8, 14))
    cfg_m = ExperimentConfig(**{**_asdict(cfg), "algo": "mcucb", "command": "integrate"})
    rows = []
    for n in grid:
        cfg_m.n = n
        row, _ = _integrate_row(cfg_m, env, cfg.k, lambda K: [stream(cfg.seed, n, r) for r in range(cfg.reps)])
        rows.append(row)
    slope = None
    if len(rows) >= 3:
        slope = scaling_fit([r["n"] for r in rows], [r["regret_mean"] for r in rows]).slope
    for r in rows:
        rep.add(env=r["env"], K=r["K"], n=r["n"], reps=r["reps"], regret_mean=r["regret_mean"],
                regret_stderr=r["regret_stderr"], regret_bound=r["regret_bound"], n_slope=slope)
    return rep


def _run_lower_bound(cfg: ExperimentConfig) -> ExperimentReport:
    cols = ["algo", "K", "n", "worst_regret", "stderr", "n_envs", "lower_shape", "n_slope", "k_slope"]
    rep = ExperimentReport(cfg.command, cfg.seed, cols)
    algo = cfg.algo if cfg.algo in ("mcucb", "uniform", "oracle") else "mcucb"
    params = McUcbParams(b=1.0, f_max=1.0, delta=cfg.delta, a_override=cfg.a_override, variance=cfg.variance)
    report = scaling_experiment(
        cfg.k_grid or (2, 4, 8, 16), cfg.n_grid or (512, 2048, 8192), algo=algo,
        env_samples=cfg.env_samples, reps=max(cfg.reps, 100), master_seed=cfg.seed, params=params,
    )
    for e in report.entries:
        ns = report.n_slopes.get(e.K)
        ks = report.k_slopes.get(e.n)
        rep.add(algo=algo, K=e.K, n=e.n, worst_regret=e.worst_regret, stderr=e.stderr, n_envs=e.n_envs,
                lower_shape=lower_bound_shape(e.K, e.n),
                n_slope=ns.slope if ns else None, k_slope=ks.slope if ks else None)
    return rep


def _run_concentration(cfg: ExperimentConfig) -> ExperimentReport:
    cols = ["dist", "n", "delta", "trials", "mean_violation_rate", "stddev_violation_rate",
            "allowed_rate", "below_threshold"]
    rep = ExperimentReport(cfg.command, cfg.seed, cols)
    dist = "constant" if cfg.dist == "constant" else parse_noise(cfg.dist, cfg.b)
    delta = cfg.delta if cfg.delta is not None else 0.05
    for n in cfg.n_grid or (10, 100, 1000):
        c = coverage_test(dist, n, delta, cfg.trials, cfg.seed)
        rep.add(dist=cfg.dist, n=n, delta=delta, trials=cfg.trials,
                mean_violation_rate=c.mean_violation_rate, stddev_violation_rate=c.stddev_violation_rate,
                allowed_rate=delta + c.slack(), below_threshold=c.below_threshold)
    return rep


ASIAN_COLUMNS = ["K", "algo", "mse", "mse_stderr", "mean_estimate", "reps", "n", "strike"]


def asian_sweep(n, k_grid, reps, seed, spec=AsianOptionSpec(), algos=("mcucb", "uniform"),
                a_override=None, true_price=None, workers=None):
    """MSE of each allocator against the reference price, one entry per (K, algo).

    MC-UCB uses ``A = 150 log n`` unless ``a_override`` is given.  All
    allocators at a given K share the draws of ``stream(seed, K, r)``.
    """
    if true_price is None:
        if spec != AsianOptionSpec():
            raise ConfigurationError("no reference price for non-default option parameters")
        true_price = REFERENCE_PRICE
    A = a_override if a_override is not None else 150.0 * math.log(n)
    out = []
    for K in k_grid:
        s = asian_environment(spec, K)
        plans = []
        for a in algos:
            if a == "mcucb":
                plans.append(mcucb_plan(McUcbParams(a_override=A), n, K))
            elif a == "uniform":
                plans.append(fixed_plan(uniform_counts(n, K), n, K))
            else:
                raise ConfigurationError(f"unsupported allocator {a!r} for the option experiment")
        res = run_plans(s, n, [stream(seed, K, r) for r in range(reps)], plans, workers=workers)
        for a, r in zip(algos, res):
            se = (r.estimates - true_price) ** 2
            out.append(dict(K=K, algo=a, mse=float(se.mean()),
                            mse_stderr=float(se.std(ddof=1) / math.sqrt(reps)),
                            mean_estimate=float(r.estimates.mean()), reps=reps, n=n, strike=spec.strike,
                            squared_errors=se))
    return out


def _run_asian(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.command, cfg.seed, ASIAN_COLUMNS)
    spec = AsianOptionSpec(strike=cfg.strike)
    grid = cfg.k_grid or tuple(range(1, 51))
    for row in asian_sweep(cfg.n, grid, cfg.reps, cfg.seed, spec, cfg.algos, cfg.a_override):
        row.pop("squared_errors")
        rep.add(**row)
    return rep


def _asdict(cfg):
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


_RUNNERS = {
    "integrate": _run_integrate,
    "sweep-strata": _run_sweep,
    "scaling": _run_scaling,
    "lower-bound": _run_lower_bound,
    "concentration": _run_concentration,
    "asian": _run_asian,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    report = _RUNNERS[cfg.command](cfg)
    if cfg.trace and cfg.command == "integrate" and cfg.algo == "mcucb":
        report.meta["trace"] = _trace_path(cfg)
        _write_trace(cfg)
    return report


def _trace_path(cfg):
    if cfg.out in (None, "-"):
        raise ConfigurationError("--trace needs --out")
    return str(Path(cfg.out).with_suffix(".trace.csv"))


def _write_trace(cfg):
    from .allocate import mcucb_run

    env = _env_of(cfg)
    part = partition_for_k(env.dim, cfg.k)
    res = mcucb_run(env, part, cfg.n, _mcucb_params(cfg, env), stream(cfg.seed, 0), trace=True)
    rep = ExperimentReport("trace", cfg.seed, ["t", "chosen"] + [f"B{k}" for k in range(part.K)])
    for t, k, B in res.trace:
        rep.add(t=t, chosen=k, **{f"B{j}": float(b) for j, b in enumerate(B)})
    emit_csv(rep, _trace_path(cfg))


# --------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return tuple(out)


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adastrat", description="Adaptive stratified Monte Carlo experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--out", default="-", help="CSV path, '-' for stdout")
        sp.add_argument("--reps", type=int, default=1000)

    def alloc(sp):
        sp.add_argument("--env", default="heteroscedastic-ramp")
        sp.add_argument("--dim", type=int, default=1)
        sp.add_argument("--noise", default="gaussian", help="gaussian, uniform or bernoulli:<p>")
        sp.add_argument("--b", type=float)
        sp.add_argument("--n", type=int, default=1000)
        sp.add_argument("--fmax", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--a-override", type=float)
        sp.add_argument("--variance", choices=("biased", "unbiased"), default="biased")

    sp = sub.add_parser("integrate", help="repeated runs of one allocator on one partition")
    common(sp)
    alloc(sp)
    sp.add_argument("--algo", choices=ALGOS, default="mcucb")
    sp.add_argument("--k", type=int, default=4, help="number of strata (a perfect d-th power)")
    sp.add_argument("--auto-k", action="store_true")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--trace", action="store_true")

    sp = sub.add_parser("sweep-strata", help="one row per number of strata")
    common(sp)
    alloc(sp)
    sp.add_argument("--algo", choices=ALGOS, default="mcucb")
    sp.add_argument("--k-grid", type=_int_list, default=())

    sp = sub.add_parser("scaling", help="MC-UCB pseudo-regret against n")
    common(sp)
    alloc(sp)
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--n-grid", type=_int_list, default=())

    sp = sub.add_parser("lower-bound", help="worst-case regret on Bernoulli lower-bound environments")
    common(sp)
    sp.add_argument("--algo", choices=("mcucb", "uniform", "oracle"), default="mcucb")
    sp.add_argument("--k-grid", type=_int_list, default=())
    sp.add_argument("--n-grid", type=_int_list, default=())
    sp.add_argument("--env-samples", type=int, default=8)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--a-override", type=float)
    sp.add_argument("--variance", choices=("biased", "unbiased"), default="biased")

    sp = sub.add_parser("concentration", help="empirical coverage of the deviation bounds")
    common(sp)
    sp.add_argument("--dist", default="gaussian", help="gaussian, uniform, bernoulli:<p> or constant")
    sp.add_argument("--b", type=float)
    sp.add_argument("--n-grid", type=_int_list, default=())
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--trials", type=int, default=10000)

    sp = sub.add_parser("asian", help="Asian option MSE against the number of strata")
    common(sp)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--k-grid", type=_int_list, default=())
    sp.add_argument("--strike", type=float, default=120.0)
    sp.add_argument("--a-override", type=float)
    sp.add_argument("--algos", type=_str_list, default=("mcucb", "uniform"))
    return p


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    kwargs = {k: v for k, v in vars(ns).items() if k in names and v is not None}
    return ExperimentConfig(**kwargs)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except ConfigurationError as exc:
        parser.exit(1, f"adastrat: error: {exc}\n")
    try:
        report = run_experiment(cfg)
        emit_csv(report, cfg.out)
    except (AdastratError, ValueError, KeyError, OverflowError, OSError) as exc:
        print(f"adastrat: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
