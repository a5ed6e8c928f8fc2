"""Sequential allocation of a sampling budget over strata.

Algorithms
----------
``mcucb``
    Two samples per stratum, then repeatedly sample the stratum maximising
    ``B_k = (w_k / T_k) * (sigma_hat_k + A / sqrt(T_k))``.
``uniform``
    ``floor(n / K)`` samples per stratum, the remainder going to the first
    strata.
``oracle``
    Oracle proportions ``w_k sigma_k`` rounded by largest remainder.
``crude``
    Plain Monte Carlo on the whole cube.

Randomness
----------
A run of budget ``n`` consumes an ``(n, n_uniform)`` block of uniforms and an
``(n, n_normal)`` block of standard normals from its own generator, drawn
up front in that order.  Row ``t`` is used for the ``t``-th observation
whatever stratum it lands in.  Because of this, a batch of runs gives exactly
the same per-run results as running each one alone with the same generator.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import InfeasibleBudgetError, UndefinedStatisticsError, ConfigurationError
from .metrics import QuadratureSpec, optimal_allocation, partition_truth
from .model import Environment
from .partition import Partition, make_hypercubic, place

MEMORY_BUDGET = 256 * 2**20
WORKERS_ENV = "ADASTRAT_WORKERS"
# samples per observe call in fixed allocations
_FIXED_BLOCK = 2**15


class StratifiedSampler(Protocol):
    """What the allocators need from a stratified problem.

    ``observe`` maps stratum indices ``(N,)`` and raw draws ``(N, n_uniform)``,
    ``(N, n_normal)`` to observations.  ``runs`` gives, per element, the index
    of the run it belongs to; only samplers whose parameters vary by run
    (see ``take``) look at it.
    """

    weights: np.ndarray
    n_uniform: int
    n_normal: int

    def observe(self, strata, uniform, normal, runs=None) -> np.ndarray: ...


class PartitionSampler:
    """Uniform sampling inside the strata of a box partition."""

    def __init__(self, env: Environment, partition: Partition):
        if env.dim != partition.dim:
            raise ConfigurationError("environment and partition dimensions differ")
        self.env = env
        self.partition = partition
        self.weights = partition.weights
        self.n_uniform = env.dim + env.noise.n_uniform
        self.n_normal = env.noise.n_normal
        self._lo = partition.lowers
        self._hi = partition.uppers

    def observe(self, strata, uniform, normal, runs=None):
        d = self.env.dim
        x = place(uniform[:, :d], self._lo[strata], self._hi[strata])
        eps = self.env.noise.transform(uniform[:, d:], normal)
        return self.env.mean_fn(x) + self.env.std_fn(x) * eps

    def true_sigmas(self, quad: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
        return partition_truth(self.env, self.partition, quad)[1]

    def take(self, sl: slice):
        return self


def as_sampler(env, partition: Partition | None = None):
    if partition is None:
        if isinstance(env, Environment):
            return PartitionSampler(env, make_hypercubic(env.dim, 1))
        return env
    return PartitionSampler(env, partition)


# --------------------------------------------------------------------------
# single-stratum statistics

@dataclass
class Accumulator:
    count: int = 0
    sum: float = 0.0
    sum_sq: float = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        self.sum += x
        self.sum_sq += x * x

    @classmethod
    def of(cls, samples) -> "Accumulator":
        acc = cls()
        for x in samples:
            acc.push(float(x))
        return acc


def _sigma_hat(count, s1, s2, unbiased=False):
    mean = s1 / count
    var = np.maximum(0.0, s2 / count - mean * mean)
    if unbiased:
        var = var * count / np.maximum(count - 1, 1)
    return mean, np.sqrt(var)


def empirical_stats(acc: Accumulator, *, unbiased: bool = False) -> tuple[float, float]:
    """``(mean, std)`` of the accumulated samples; std normalised by 1/T by default."""
    if acc.count < 1:
        raise UndefinedStatisticsError("no samples in accumulator")
    if unbiased and acc.count < 2:
        raise UndefinedStatisticsError("unbiased variance needs two samples")
    m, s = _sigma_hat(acc.count, acc.sum, acc.sum_sq, unbiased)
    return float(m), float(s)


def _ucb(w, count, s1, s2, A, unbiased=False):
    _, sig = _sigma_hat(count, s1, s2, unbiased)
    return (w / count) * (sig + A * np.sqrt(1.0 / count))


def ucb_index(w_k: float, acc: Accumulator, A: float, *, unbiased: bool = False) -> float:
    if acc.count < 1:
        raise UndefinedStatisticsError("upper confidence index needs a sample")
    return float(_ucb(w_k, acc.count, acc.sum, acc.sum_sq, A, unbiased))


# --------------------------------------------------------------------------
# parameters and results

@dataclass(frozen=True)
class McUcbParams:
    """Inputs of MC-UCB.  ``delta=None`` means ``n**-2``."""

    b: float = 1.0
    f_max: float = 1.0
    delta: float | None = None
    a_override: float | None = None
    variance: str = "biased"

    def __post_init__(self):
        if not self.b > 0 or not self.f_max > 0:
            raise ConfigurationError("b and f_max must be positive")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")
        if self.a_override is not None and not self.a_override > 0:
            raise ConfigurationError("a_override must be positive")
        if self.variance not in ("biased", "unbiased"):
            raise ConfigurationError("variance must be 'biased' or 'unbiased'")

    def width(self, n: int, K: int) -> float:
        """Confidence width ``A = 2 sqrt((1 + 3b + 4 f_max^2) log(2nK/delta))``."""
        if self.a_override is not None:
            return float(self.a_override)
        delta = self.delta if self.delta is not None else float(n) ** -2
        return 2.0 * math.sqrt((1 + 3 * self.b + 4 * self.f_max**2) * math.log(2 * n * K / delta))


@dataclass
class RunResult:
    counts: np.ndarray
    stratum_means: np.ndarray
    estimate: float
    trace: list | None = field(default=None, repr=False)


@dataclass
class BatchResult:
    """Per-run results stacked along the first axis."""

    counts: np.ndarray
    stratum_means: np.ndarray
    estimates: np.ndarray

    def __len__(self) -> int:
        return self.estimates.shape[0]

    def run(self, i: int) -> RunResult:
        return RunResult(self.counts[i].copy(), self.stratum_means[i].copy(), float(self.estimates[i]))

    @classmethod
    def concat(cls, parts: Sequence["BatchResult"]) -> "BatchResult":
        return cls(
            np.concatenate([p.counts for p in parts]),
            np.concatenate([p.stratum_means for p in parts]),
            np.concatenate([p.estimates for p in parts]),
        )


def stratified_estimate(weights, means) -> np.ndarray:
    """``sum_k w_k * means[..., k]`` accumulated in stratum order."""
    means = np.asarray(means, dtype=float)
    est = np.zeros(means.shape[:-1])
    for k, w in enumerate(np.asarray(weights, dtype=float)):
        est = est + w * means[..., k]
    return est


# --------------------------------------------------------------------------
# allocations

def uniform_counts(n: int, K: int) -> np.ndarray:
    if n < K:
        raise InfeasibleBudgetError(f"uniform allocation needs n >= K (n={n}, K={K})")
    counts = np.full(K, n // K, dtype=np.int64)
    counts[: n % K] += 1
    return counts


def round_allocation(target, n: int, minimum: int = 1) -> np.ndarray:
    """Largest-remainder rounding of fractional counts to integers summing to n.

    Every stratum receives at least ``minimum`` samples.
    """
    target = np.asarray(target, dtype=float)
    K = target.size
    if n < minimum * K:
        raise InfeasibleBudgetError(f"need n >= {minimum}K (n={n}, K={K})")
    base = np.maximum(np.floor(target).astype(np.int64), minimum)
    rem = target - np.floor(target)
    short = n - int(base.sum())
    if short > 0:
        # stable sort keeps ties at the lowest index
        order = np.argsort(-rem, kind="stable")
        base[order[:short]] += 1
    while short < 0:
        # excess comes from minimum bumps; shave strata furthest above target
        over = np.where(base > minimum, base - target, -np.inf)
        k = int(np.argmax(over))
        base[k] -= 1
        short += 1
    return base


def oracle_counts(weights, sigmas, n: int) -> np.ndarray:
    return round_allocation(optimal_allocation(weights, sigmas, n), n)


# --------------------------------------------------------------------------
# engine

def _draw_block(rngs, n, nu, nz):
    # time-major so that the rows used at step t are contiguous
    R = len(rngs)
    U = np.empty((n, R, nu))
    Z = np.empty((n, R, nz))
    for i, g in enumerate(rngs):
        U[:, i] = g.random((n, nu))
        Z[:, i] = g.standard_normal((n, nz))
    return U, Z


def _fixed_core(sampler, counts, U, Z):
    n, R = U.shape[:2]
    K = counts.size
    seq = np.repeat(np.arange(K), counts)
    runs = np.arange(R)
    x = np.empty((n, R))
    # blocks of time steps keep the sampler's temporaries cache-sized
    span = max(1, _FIXED_BLOCK // R)
    for t0 in range(0, n, span):
        t1 = min(n, t0 + span)
        m = (t1 - t0) * R
        x[t0:t1] = sampler.observe(
            np.repeat(seq[t0:t1], R), U[t0:t1].reshape(m, -1), Z[t0:t1].reshape(m, -1), np.tile(runs, t1 - t0)
        ).reshape(t1 - t0, R)
    ends = np.cumsum(counts)
    sums = np.empty((R, K))
    for k in range(K):
        # cumsum adds strictly in sample order, whatever the batch size
        sums[:, k] = np.cumsum(x[ends[k] - counts[k] : ends[k]], axis=0)[-1]
    means = sums / counts
    cnt = np.broadcast_to(counts, (R, K)).copy()
    return BatchResult(cnt, means, stratified_estimate(sampler.weights, means))


def _mcucb_core(sampler, n, U, Z, A, unbiased, trace):
    R = U.shape[1]
    w = np.asarray(sampler.weights, dtype=float)
    K = w.size
    rows = np.arange(R)
    x0 = sampler.observe(
        np.repeat(np.repeat(np.arange(K), 2), R),
        U[: 2 * K].reshape(2 * K * R, -1),
        Z[: 2 * K].reshape(2 * K * R, -1),
        np.tile(rows, 2 * K),
    ).reshape(K, 2, R)
    s1 = (x0[:, 0] + x0[:, 1]).T.copy()
    s2 = (x0[:, 0] ** 2 + x0[:, 1] ** 2).T.copy()
    cnt = np.full((R, K), 2, dtype=np.int64)
    B = _ucb(w, cnt, s1, s2, A, unbiased)
    log = [] if trace else None
    for t in range(2 * K, n):
        k = np.argmax(B, axis=1)
        if log is not None:
            log.append((t + 1, int(k[0]), B[0].copy()))
        x = sampler.observe(k, U[t], Z[t], rows)
        s1[rows, k] += x
        s2[rows, k] += x * x
        cnt[rows, k] += 1
        B[rows, k] = _ucb(w[k], cnt[rows, k], s1[rows, k], s2[rows, k], A, unbiased)
    means = s1 / cnt
    return BatchResult(cnt, means, stratified_estimate(w, means)), log


@dataclass(frozen=True)
class Plan:
    """One allocation rule to run on a block of draws."""

    algo: str
    A: float | None = None
    unbiased: bool = False
    counts: np.ndarray | None = None


def mcucb_plan(params: McUcbParams, n: int, K: int) -> Plan:
    if n < 2 * K:
        raise InfeasibleBudgetError(f"MC-UCB needs n >= 2K (n={n}, K={K})")
    if n < 4 * K:
        warnings.warn(f"n={n} < 4K={4 * K}: outside the regime of the regret bound")
    return Plan("mcucb", params.width(n, K), params.variance == "unbiased")


def fixed_plan(counts, n: int, K: int) -> Plan:
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (K,) or counts.sum() != n or np.any(counts < 1):
        raise InfeasibleBudgetError("fixed counts must be >= 1 and sum to n")
    return Plan("fixed", counts=counts)


def _chunk_size(n, nu, nz):
    per_run = n * (nu + nz + 2) * 8
    return max(1, MEMORY_BUDGET // per_run)


def _run_chunk(job):
    plans, sampler, n, rngs = job
    U, Z = _draw_block(rngs, n, sampler.n_uniform, sampler.n_normal)
    out = []
    for p in plans:
        if p.algo == "mcucb":
            out.append(_mcucb_core(sampler, n, U, Z, p.A, p.unbiased, False)[0])
        else:
            out.append(_fixed_core(sampler, p.counts, U, Z))
    return out


def _workers(workers):
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def run_plans(sampler, n: int, rngs: Sequence[np.random.Generator], plans: Sequence[Plan],
              *, workers: int | None = None) -> list[BatchResult]:
    """Run several allocation rules on the same draws (common random numbers).

    Each plan's results equal those of a separate ``run_batch`` call with
    identically seeded generators.
    """
    size = _chunk_size(n, sampler.n_uniform, sampler.n_normal)
    jobs = []
    for start in range(0, len(rngs), size):
        sl = slice(start, min(start + size, len(rngs)))
        jobs.append((list(plans), sampler.take(sl), n, list(rngs[sl])))
    nw = _workers(workers)
    if nw > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return [BatchResult.concat([p[i] for p in parts]) for i in range(len(plans))]


def run_batch(
    algo: str,
    sampler,
    n: int,
    rngs: Sequence[np.random.Generator],
    *,
    params: McUcbParams | None = None,
    counts=None,
    workers: int | None = None,
) -> BatchResult:
    """Run ``len(rngs)`` independent repetitions of one algorithm.

    ``algo`` is ``"mcucb"`` (uses ``params``) or ``"fixed"`` (needs integer
    ``counts``).  Runs are processed in memory-bounded chunks, optionally on
    a process pool (``workers``, default from ``ADASTRAT_WORKERS``); results
    are reassembled in run order, so the output does not depend on
    ``workers``.
    """
    K = len(sampler.weights)
    if algo == "mcucb":
        plan = mcucb_plan(params or McUcbParams(), n, K)
    elif algo == "fixed":
        plan = fixed_plan(counts, n, K)
    else:
        raise ConfigurationError(f"unknown algorithm {algo!r}")
    return run_plans(sampler, n, rngs, [plan], workers=workers)[0]


# --------------------------------------------------------------------------
# single runs

def mcucb_run(env, partition, n: int, params: McUcbParams, rng, *, trace: bool = False) -> RunResult:
    """One MC-UCB run; ``env`` may also be a ready-made sampler (``partition=None``).

    Ties in the index are broken towards the lowest stratum.  With
    ``trace=True`` the result records ``(t, chosen stratum, B values)`` for
    every adaptive step ``t = 2K+1..n``.
    """
    sampler = as_sampler(env, partition)
    plan = mcucb_plan(params, n, len(sampler.weights))
    U, Z = _draw_block([rng], n, sampler.n_uniform, sampler.n_normal)
    res, log = _mcucb_core(sampler.take(slice(0, 1)), n, U, Z, plan.A, plan.unbiased, trace)
    out = res.run(0)
    out.trace = log
    return out


def fixed_run(env, partition, counts, rng) -> RunResult:
    sampler = as_sampler(env, partition)
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    if counts.shape != (len(sampler.weights),) or np.any(counts < 1):
        raise InfeasibleBudgetError("every stratum needs at least one sample")
    U, Z = _draw_block([rng], n, sampler.n_uniform, sampler.n_normal)
    return _fixed_core(sampler.take(slice(0, 1)), counts, U, Z).run(0)


def uniform_stratified_run(env, partition, n: int, rng) -> RunResult:
    sampler = as_sampler(env, partition)
    return fixed_run(sampler, None, uniform_counts(n, len(sampler.weights)), rng)


def oracle_run(env, partition, n: int, quad: QuadratureSpec = QuadratureSpec(), rng=None, *, sigmas=None) -> RunResult:
    """Sample with the rounded oracle allocation; ``sigmas`` overrides the truth."""
    sampler = as_sampler(env, partition)
    K = len(sampler.weights)
    if n < K:
        raise InfeasibleBudgetError(f"oracle allocation needs n >= K (n={n}, K={K})")
    if sigmas is None:
        sigmas = sampler.true_sigmas(quad)
    return fixed_run(sampler, None, oracle_counts(sampler.weights, sigmas, n), rng)


def crude_mc_run(env: Environment, n: int, rng) -> RunResult:
    if n < 1:
        raise InfeasibleBudgetError("crude Monte Carlo needs n >= 1")
    return fixed_run(env, make_hypercubic(env.dim, 1), [n], rng)
