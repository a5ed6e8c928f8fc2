"""Ground-truth stratum statistics, oracle allocation and performance measures.

Notation: ``w`` stratum weights, ``sigma`` true within-stratum standard
deviations, ``counts`` samples per stratum, ``n`` total budget.  The oracle
pseudo-risk on a partition is ``(sum_k w_k sigma_k)**2 / n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DegenerateProblemError, InfeasibleBudgetError
from .model import Environment
from .partition import Partition, Stratum
from .rng import DEFAULT_SEED, stream

DEFAULT_POINTS = {1: 256, 2: 64, 3: 16}
_CHUNK_POINTS = 2**21


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor midpoint rule with ``points_per_axis`` nodes per stratum axis.

    ``points_per_axis=None`` picks 256/64/16 for d = 1/2/3.  Above d = 3 the
    midpoint rule is refused unless ``rule="mc"``, which replaces it with
    ``mc_samples`` seeded uniform draws per stratum.
    """

    points_per_axis: int | None = None
    rule: str = "midpoint"
    mc_samples: int = 10**6
    mc_seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.rule not in ("midpoint", "mc"):
            raise ConfigurationError(f"unknown quadrature rule {self.rule!r}")
        if self.points_per_axis is not None and self.points_per_axis < 2:
            raise ConfigurationError("points_per_axis must be >= 2")

    def unit_nodes(self, dim: int) -> np.ndarray:
        """Nodes in the unit cube, shape (P, dim)."""
        if self.rule == "mc":
            return stream(self.mc_seed, dim).random((self.mc_samples, dim))
        p = self.points_per_axis or DEFAULT_POINTS.get(dim)
        if p is None:
            raise ConfigurationError(
                f"midpoint quadrature refused for d={dim} > 3; use rule='mc'"
            )
        if p**dim > 2**26:
            raise ConfigurationError(f"{p}^{dim} quadrature nodes is too many")
        axis = (np.arange(p) + 0.5) / p
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


class StratumTruth(NamedTuple):
    mu: float
    sigma: float


def _box_moments(env: Environment, lowers, uppers, nodes):
    """Per-box mean of f, variance of f, and mean of s**2 under the node rule."""
    K = lowers.shape[0]
    P = nodes.shape[0]
    mu = np.empty(K)
    var_f = np.empty(K)
    ms2 = np.empty(K)
    ms = np.empty(K)
    step = max(1, _CHUNK_POINTS // P)
    for start in range(0, K, step):
        lo = lowers[start : start + step, None, :]
        wd = uppers[start : start + step, None, :] - lo
        pts = (lo + nodes[None, :, :] * wd).reshape(-1, env.dim)
        f = np.asarray(env.mean_fn(pts), dtype=float).reshape(-1, P)
        s = np.asarray(env.std_fn(pts), dtype=float).reshape(-1, P)
        m = f.mean(axis=1)
        mu[start : start + step] = m
        var_f[start : start + step] = ((f - m[:, None]) ** 2).mean(axis=1)
        ms2[start : start + step] = (s**2).mean(axis=1)
        ms[start : start + step] = s.mean(axis=1)
    return mu, var_f, ms2, ms


def true_stratum_stats(env: Environment, stratum: Stratum, quad: QuadratureSpec = QuadratureSpec()) -> StratumTruth:
    """Mean and standard deviation of one uniform draw from the stratum.

    ``sigma**2`` is the within-stratum variance of ``f`` plus the stratum
    average of ``s**2``.  Uses ``mean_fn``/``std_fn`` directly, never noisy
    evaluations.
    """
    lo = np.asarray([stratum.lower])
    hi = np.asarray([stratum.upper])
    mu, var_f, ms2, _ = _box_moments(env, lo, hi, quad.unit_nodes(env.dim))
    return StratumTruth(float(mu[0]), float(math.sqrt(var_f[0] + ms2[0])))


def partition_truth(env: Environment, partition: Partition, quad: QuadratureSpec = QuadratureSpec()):
    """Arrays ``(mu_k, sigma_k)`` for every stratum of the partition."""
    mu, var_f, ms2, _ = _box_moments(env, partition.lowers, partition.uppers, quad.unit_nodes(env.dim))
    return mu, np.sqrt(var_f + ms2)


def integral_of(env: Environment, quad: QuadratureSpec = QuadratureSpec()):
    """Quadrature values of ``(∫f, ∫s)`` over the unit cube."""
    one = np.zeros((1, env.dim)), np.ones((1, env.dim))
    mu, _, _, ms = _box_moments(env, *one, quad.unit_nodes(env.dim))
    return float(mu[0]), float(ms[0])


def true_integral(env: Environment, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """``∫f``: the environment's exact value when it has one, else quadrature."""
    if env.integral is not None:
        return float(env.integral)
    return integral_of(env, quad)[0]


def sigma_of_partition(env: Environment, partition: Partition, quad: QuadratureSpec = QuadratureSpec()) -> float:
    _, sigma = partition_truth(env, partition, quad)
    return float(np.dot(partition.weights, sigma))


def optimal_allocation(weights, sigmas, n: float, *, strict: bool = False) -> np.ndarray:
    """Oracle counts ``n * w_k sigma_k / sum_i w_i sigma_i`` (fractional).

    When every ``w_k sigma_k`` is zero any allocation is optimal; a uniform
    allocation is returned with a warning, or ``DegenerateProblemError`` is
    raised if ``strict``.
    """
    w = np.asarray(weights, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    ws = w * s
    total = ws.sum()
    if not total > 0:
        if strict:
            raise DegenerateProblemError("all strata have zero standard deviation")
        warnings.warn("all strata have zero standard deviation; using uniform allocation")
        return np.full(w.shape, n / w.size)
    return n * ws / total


def pseudo_risk(weights, sigmas, counts) -> np.ndarray | float:
    """``sum_k w_k**2 sigma_k**2 / T_k``; ``counts`` may carry leading run axes.

    Zero-variance strata contribute 0 whatever their count; an empty stratum
    with positive variance makes the risk ``inf``.
    """
    w = np.asarray(weights, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    T = np.asarray(counts, dtype=float)
    num = (w * s) ** 2
    num = np.broadcast_to(num, T.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(num > 0, num / T, 0.0)
    terms = np.where((num > 0) & (T <= 0), np.inf, terms)
    out = terms.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def oracle_risk(weights, sigmas, n: float) -> float:
    return float(np.dot(weights, sigmas)) ** 2 / n


def pseudo_regret(weights, sigmas, counts, n: float | None = None):
    """Pseudo-risk minus the oracle risk ``Sigma**2 / n`` on the same partition.

    ``sigmas`` and ``counts`` may carry matching leading run axes.
    """
    T = np.asarray(counts, dtype=float)
    if n is None:
        n = T.sum(axis=-1)
    big_sigma = (np.asarray(weights, dtype=float) * np.asarray(sigmas, dtype=float)).sum(axis=-1)
    out = pseudo_risk(weights, sigmas, T) - big_sigma**2 / np.asarray(n, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def quality(env: Environment, partition: Partition, n: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Gap between this partition's oracle risk and the all-partition infimum ``(∫s)**2 / n``."""
    sig = sigma_of_partition(env, partition, quad)
    _, int_s = integral_of(env, quad)
    return (sig**2 - int_s**2) / n


class HolderBound(NamedTuple):
    quality: float
    sigma_gap: float


def _check_power(K: int, d: int) -> None:
    l = round(K ** (1.0 / d))
    if not any(c >= 1 and c**d == K for c in (l - 1, l, l + 1)):
        raise ConfigurationError(f"K={K} is not a perfect {d}-th power")


def holder_quality_bound(M: float, alpha: float, d: int, K: int, sigma_N1: float, n: float) -> HolderBound:
    """Rate bounds for the hypercubic partition with ``K = l**d`` strata.

    ``sigma_gap = sqrt(2d) M K**(-alpha/d)`` bounds ``Sigma_{N_K} - ∫s``;
    ``quality = 2 sigma_N1 sigma_gap / n`` bounds the partition quality.
    """
    _check_power(K, d)
    gap = math.sqrt(2 * d) * M * K ** (-alpha / d)
    return HolderBound(2.0 * sigma_N1 * gap / n, gap)


def mcucb_regret_bound(sigma_N: float, b: float, f_max: float, K: int, n: int) -> float:
    """Expected pseudo-regret bound of MC-UCB on a K-stratum partition (n >= 4K)."""
    if n < 4 * K:
        raise InfeasibleBudgetError(f"bound requires n >= 4K (n={n}, K={K})")
    lead = (
        24.0 * math.sqrt(2.0) * sigma_N * math.sqrt(1 + 3 * b + 4 * f_max**2)
        * ((f_max + 4.0) / 4.0) ** (1.0 / 3.0)
        * K ** (1.0 / 3.0) * n ** (-4.0 / 3.0) * math.sqrt(math.log(n * K))
    )
    return lead + 14.0 * K * sigma_N**2 / n**2


def lower_bound_shape(K: int, n: int, constant: float = 1.0) -> float:
    """Minimax regret lower-bound shape ``C K**(1/3) n**(-4/3)``; C is unspecified."""
    return constant * K ** (1.0 / 3.0) * n ** (-4.0 / 3.0)
