"""Deviation bounds behind the MC-UCB confidence width, and coverage checks.

``bernstein_bound`` bounds ``|mean_hat - mean|`` and ``stddev_bound`` bounds
``|sqrt(V_hat) - sqrt(V)|`` (``V_hat`` normalised by ``1/n``), each with
probability at least ``1 - delta`` for sub-Gaussian samples of scale ``b``.
With ``V = f_max**2``, ``n = T`` and ``delta = delta' / (nK)`` the second
equals ``A / sqrt(T)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .model import NoiseSpec
from .rng import stream

KINDS = ("mean-bernstein", "stddev")


@dataclass(frozen=True)
class BoundSpec:
    kind: str
    b: float
    n: int
    delta: float
    variance_param: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"kind must be one of {KINDS}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if self.b < 0 or self.variance_param < 0:
            raise ConfigurationError("b and variance_param must be nonnegative")


def bernstein_bound(spec: BoundSpec) -> float:
    """``sqrt(2 sigma2 log(2/delta) / n) + b log(2/delta) / n``."""
    if spec.kind != "mean-bernstein":
        raise ConfigurationError("bernstein_bound needs kind='mean-bernstein'")
    L = math.log(2.0 / spec.delta)
    return math.sqrt(2.0 * spec.variance_param * L / spec.n) + spec.b * L / spec.n


def stddev_bound(spec: BoundSpec) -> float:
    """``2 sqrt((1 + 3b + 4V) log(2/delta) / n)``."""
    if spec.kind != "stddev":
        raise ConfigurationError("stddev_bound needs kind='stddev'")
    L = math.log(2.0 / spec.delta)
    return 2.0 * math.sqrt((1 + 3 * spec.b + 4 * spec.variance_param) * L / spec.n)


@dataclass(frozen=True)
class CoverageResult:
    n: int
    delta: float
    trials: int
    mean_violation_rate: float
    stddev_violation_rate: float
    below_threshold: bool
    """True when ``n < b log(2/delta)``, a regime the stddev proof does not cover."""

    def slack(self) -> float:
        return 3.0 * math.sqrt(self.delta * (1 - self.delta) / self.trials)


def coverage_test(
    dist: NoiseSpec | str,
    n: int,
    delta: float,
    trials: int,
    seed: int,
    *,
    level: float = 0.0,
    b: float | None = None,
) -> CoverageResult:
    """Fraction of trials in which each bound fails on ``n`` i.i.d. samples.

    ``dist`` is a unit-variance ``NoiseSpec`` (samples ``level + eps``) or the
    string ``"constant"`` (samples all equal to ``level``, variance 0).  Trial
    ``i`` draws from ``stream(seed, i)``.
    """
    if trials < 1000:
        raise ConfigurationError("coverage needs at least 1000 trials")
    if dist == "constant":
        noise, var = None, 0.0
        b = 1.0 if b is None else b
    elif isinstance(dist, NoiseSpec):
        noise, var = dist, 1.0
        b = dist.b if b is None else b
    else:
        raise ConfigurationError(f"unsupported distribution {dist!r}")
    mean_b = bernstein_bound(BoundSpec("mean-bernstein", b, n, delta, var))
    sd_b = stddev_bound(BoundSpec("stddev", b, n, delta, var))
    mean_bad = sd_bad = 0
    for i in range(trials):
        if noise is None:
            x = np.full(n, float(level))
        else:
            x = level + noise.sample(stream(seed, i), n)
        m = x.mean()
        v = max(0.0, float(np.mean(x * x) - m * m))
        mean_bad += int(abs(m - level) > mean_b)
        sd_bad += int(abs(math.sqrt(v) - math.sqrt(var)) > sd_b)
    return CoverageResult(
        n, delta, trials, mean_bad / trials, sd_bad / trials, n < b * math.log(2 / delta)
    )
