"""Bernoulli lower-bound environments and the regret-scaling experiment.

An environment has ``2K`` strata of weight ``1/(2K)``.  The first ``K`` are
Bernoulli with parameter ``mu + upsilon_k mu / 2`` (``upsilon_k = +-1``), the
last ``K`` are Bernoulli(1/2).  Choosing ``sigma = (1/7)(K/n)**(1/3)`` makes
the worst case over ``upsilon`` regret of order ``K**(1/3) n**(-4/3)``.

These environments bypass the point domain: sampling stratum ``k`` draws the
Bernoulli directly.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .allocate import McUcbParams, oracle_counts, run_batch, uniform_counts
from .errors import ConfigurationError, InfeasibleBudgetError
from .metrics import pseudo_regret
from .rng import stream


class BernoulliArms:
    """Stacked Bernoulli strata; ``probs`` has shape ``(R, K)`` (one row per run)."""

    n_uniform = 1
    n_normal = 0

    def __init__(self, probs, weights=None):
        p = np.atleast_2d(np.asarray(probs, dtype=float))
        if np.any(p < 0) or np.any(p > 1):
            raise ConfigurationError("Bernoulli parameters must lie in [0, 1]")
        self.probs = p
        K = p.shape[1]
        self.weights = np.full(K, 1.0 / K) if weights is None else np.asarray(weights, dtype=float)

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(self.probs * (1 - self.probs))

    def observe(self, strata, uniform, normal, runs=None):
        rows = 0 if runs is None or self.probs.shape[0] == 1 else runs
        return (uniform[:, 0] < self.probs[rows, strata]).astype(float)

    def take(self, sl: slice) -> "BernoulliArms":
        if self.probs.shape[0] == 1:
            return self
        return BernoulliArms(self.probs[sl], self.weights)

    def true_sigmas(self, quad=None) -> np.ndarray:
        if self.probs.shape[0] != 1:
            raise ConfigurationError("true_sigmas is per-run for stacked arms; use .sigmas")
        return self.sigmas[0]


@dataclass(frozen=True)
class LowerBoundEnv:
    k_half: int
    mu: float
    upsilon: tuple[int, ...]
    b: float = field(default=1.0, init=False)
    """Samples lie in [0, 1], so their deviations are bounded by 1."""

    def __post_init__(self):
        if not 0.0 < self.mu < 0.5:
            raise ConfigurationError("mu must lie in (0, 1/2)")
        if self.k_half < 1 or len(self.upsilon) != self.k_half:
            raise ConfigurationError("upsilon must have k_half entries")
        if any(u not in (-1, 1) for u in self.upsilon):
            raise ConfigurationError("upsilon entries must be -1 or +1")

    @property
    def K(self) -> int:
        return 2 * self.k_half

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.K, 1.0 / self.K)

    @property
    def probs(self) -> np.ndarray:
        ups = np.asarray(self.upsilon, dtype=float)
        return np.concatenate([self.mu + ups * self.mu / 2, np.full(self.k_half, 0.5)])

    @property
    def sigmas(self) -> np.ndarray:
        p = self.probs
        return np.sqrt(p * (1 - p))

    def sampler(self) -> BernoulliArms:
        return BernoulliArms(self.probs)


def make_lower_bound_env(K: int, mu: float, upsilon) -> LowerBoundEnv:
    return LowerBoundEnv(int(K), float(mu), tuple(int(u) for u in upsilon))


def sigma_for_budget(K: int, n: int) -> tuple[float, float]:
    """``sigma = (1/7)(K/n)**(1/3)`` and the smaller root ``mu`` of ``mu(1-mu) = sigma**2``."""
    if K < 1 or n < K:
        raise InfeasibleBudgetError(f"need K >= 1 and n >= K (K={K}, n={n})")
    sigma = (K / n) ** (1.0 / 3.0) / 7.0
    disc = 1.0 - 4.0 * sigma * sigma
    if disc <= 0:
        raise InfeasibleBudgetError("sigma >= 1/2: budget too small")
    # 2 s^2 / (1 + sqrt(disc)) avoids cancellation in (1 - sqrt(disc)) / 2
    mu = 2.0 * sigma * sigma / (1.0 + math.sqrt(disc))
    return sigma, mu


def sandwich_holds(mu: float) -> bool:
    """``sqrt(mu/2) <= sigma <= sqrt(mu)`` and ``sqrt(mu)/2 <= sigma_{-} <= sqrt(mu)``."""
    s = math.sqrt(mu * (1 - mu))
    lo = mu / 2
    s_minus = math.sqrt(lo * (1 - lo))
    r = math.sqrt(mu)
    return math.sqrt(mu / 2) <= s <= r and 0.5 * r <= s_minus <= r


def upsilon_set(K: int, env_samples: int, rng, exhaustive_max: int = 10) -> np.ndarray:
    """All of ``{-1,+1}^K`` when ``K <= exhaustive_max``; otherwise the two
    constant vectors followed by ``env_samples`` uniform draws."""
    if K <= exhaustive_max:
        return np.array(list(itertools.product((-1, 1), repeat=K)), dtype=int)
    extremes = np.array([[1] * K, [-1] * K])
    draws = rng.choice(np.array([-1, 1]), size=(env_samples, K))
    return np.concatenate([extremes, draws])


@dataclass(frozen=True)
class RegretEntry:
    K: int
    n: int
    worst_regret: float
    stderr: float
    worst_upsilon: tuple[int, ...]
    n_envs: int


def worst_case_regret(
    algo: str,
    K: int,
    n: int,
    env_samples: int,
    reps: int,
    master_seed: int,
    *,
    params: McUcbParams | None = None,
    exhaustive_max: int = 10,
    workers: int | None = None,
) -> RegretEntry:
    """Max over ``upsilon`` of the mean pseudo-regret of ``algo`` on ``2K`` arms.

    ``algo`` is ``"mcucb"``, ``"uniform"`` or ``"oracle"``.  Repetition ``r``
    on environment ``e`` uses ``stream(master_seed, K, n, e, r)``.
    """
    if reps < 100:
        raise ConfigurationError("reps must be >= 100")
    if env_samples < 1:
        raise ConfigurationError("env_samples must be >= 1")
    _, mu = sigma_for_budget(K, n)
    ups = upsilon_set(K, env_samples, stream(master_seed, K, n), exhaustive_max)
    envs = [make_lower_bound_env(K, mu, u) for u in ups]
    probs = np.stack([e.probs for e in envs])
    sig = np.sqrt(probs * (1 - probs))
    w = envs[0].weights
    E = len(envs)
    if algo == "mcucb":
        params = params or McUcbParams(b=1.0, f_max=1.0)
        arms = BernoulliArms(np.repeat(probs, reps, axis=0), w)
        rngs = [stream(master_seed, K, n, e, r) for e in range(E) for r in range(reps)]
        counts = run_batch("mcucb", arms, n, rngs, params=params, workers=workers).counts
        regret = pseudo_regret(w, np.repeat(sig, reps, axis=0), counts).reshape(E, reps)
    elif algo in ("uniform", "oracle"):
        # the pseudo-regret of a fixed allocation does not depend on the draws
        rows = []
        for s in sig:
            c = uniform_counts(n, 2 * K) if algo == "uniform" else oracle_counts(w, s, n)
            rows.append(np.full(reps, pseudo_regret(w, s, c)))
        regret = np.array(rows)
    else:
        raise ConfigurationError(f"unknown allocator {algo!r}")
    means = regret.mean(axis=1)
    errs = regret.std(axis=1, ddof=1) / math.sqrt(reps)
    i = int(np.argmax(means))
    return RegretEntry(K, n, float(means[i]), float(errs[i]), tuple(int(v) for v in ups[i]), E)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    residuals: np.ndarray = field(repr=False)


def scaling_fit(x, y) -> ScalingFit:
    """Least-squares line through ``(log x, log y)``; nonpositive ``y`` dropped with a warning."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if not np.all(keep):
        warnings.warn(f"dropping {int((~keep).sum())} nonpositive values from the fit")
    x, y = x[keep], y[keep]
    if x.size < 3:
        raise ConfigurationError("need at least 3 positive points to fit a slope")
    lx, ly = np.log(x), np.log(y)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    return ScalingFit(float(slope), float(intercept), ly - (slope * lx + intercept))


@dataclass
class ScalingReport:
    entries: list[RegretEntry]
    n_slopes: dict[int, ScalingFit]
    k_slopes: dict[int, ScalingFit]

    @property
    def grid(self) -> list[tuple[int, int]]:
        return [(e.K, e.n) for e in self.entries]

    @property
    def worst_regret(self) -> list[float]:
        return [e.worst_regret for e in self.entries]


def scaling_experiment(
    k_grid, n_grid, *, algo="mcucb", env_samples=8, reps=100, master_seed=0, params=None, workers=None
) -> ScalingReport:
    """Worst-case regret on the ``k_grid x n_grid`` grid plus slopes along each axis."""
    entries = [
        worst_case_regret(algo, K, n, env_samples, reps, master_seed, params=params, workers=workers)
        for K in k_grid
        for n in n_grid
    ]
    n_slopes, k_slopes = {}, {}
    if len(n_grid) >= 3:
        for K in k_grid:
            pts = [e for e in entries if e.K == K]
            n_slopes[K] = scaling_fit([e.n for e in pts], [e.worst_regret for e in pts])
    if len(k_grid) >= 3:
        for n in n_grid:
            pts = [e for e in entries if e.n == n]
            k_slopes[n] = scaling_fit([e.K for e in pts], [e.worst_regret for e in pts])
    return ScalingReport(entries, n_slopes, k_slopes)
