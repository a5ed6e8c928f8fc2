"""Asian option pricing with the Brownian endpoint stratified by quantiles.

The underlying follows Black-Scholes dynamics
``S_t = S0 exp((r - vol**2/2) t + vol W_t)``.  The endpoint ``W_T`` is
stratified into ``K`` equal-probability bands, ``W_T = sqrt(T) Phi^{-1}(u)``
with ``u`` uniform in the band, and the path is completed on ``steps``
equidistant times by a Brownian bridge.  The discounted payoff is

    exp(-rT) * max((T/steps) * sum_i S_{t_i} - C*T, 0)

a right-endpoint Riemann sum of the time integral of ``S``.

``Phi^{-1}`` is ``scipy.special.ndtri`` (the Cephes rational approximation,
accurate to double precision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError

# crude Monte Carlo price with paper parameters: 10**6 paths from stream(REFERENCE_SEED, 0)
REFERENCE_SEED = 6
REFERENCE_PATHS = 10**6
REFERENCE_PRICE = 2.1621335011190213
REFERENCE_STDERR = 0.0067778358313409165

_U_EPS = 2.0**-53


@dataclass(frozen=True)
class AsianOptionSpec:
    s0_price: float = 100.0
    rate: float = 0.05
    vol: float = 0.30
    maturity: float = 1.0
    steps: int = 16
    strike: float = 120.0

    def __post_init__(self):
        if not self.s0_price > 0:
            raise ConfigurationError("s0_price must be positive")
        if self.vol < 0:
            raise ConfigurationError("vol must be nonnegative")
        if not self.maturity > 0:
            raise ConfigurationError("maturity must be positive")
        if self.steps < 1:
            raise ConfigurationError("steps must be >= 1")

    @property
    def dt(self) -> float:
        return self.maturity / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.steps + 1) * self.dt


@dataclass(frozen=True)
class QuantileStratum:
    p_low: float
    p_high: float

    def __post_init__(self):
        if not 0.0 <= self.p_low < self.p_high <= 1.0:
            raise ConfigurationError("need 0 <= p_low < p_high <= 1")

    @property
    def weight(self) -> float:
        return self.p_high - self.p_low


def quantile_strata(K: int) -> list[QuantileStratum]:
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    return [QuantileStratum(k / K, (k + 1) / K) for k in range(K)]


def norm_ppf(u):
    """Inverse standard normal CDF, with ``u`` clamped into ``(0, 1)``."""
    u = np.clip(np.asarray(u, dtype=float), _U_EPS, 1.0 - _U_EPS)
    return ndtri(u)


def _wT(p_low, p_high, u, maturity):
    return math.sqrt(maturity) * norm_ppf(p_low + u * (p_high - p_low))


def sample_wT_in_stratum(stratum: QuantileStratum, maturity: float, rng, size=None):
    """``sqrt(T) Phi^{-1}(u)`` with ``u`` uniform on ``(p_low, p_high)``."""
    u = rng.random(size)
    out = _wT(stratum.p_low, stratum.p_high, u, maturity)
    return float(out) if size is None else out


def _bridge(w_T, z, spec: AsianOptionSpec):
    """Sequential bridge from 0 to ``w_T``; ``z`` holds ``steps - 1`` normals on its last axis.

    Vectorised over leading axes; each path is computed with the same
    elementwise operations whatever the batch size.
    """
    w_T = np.asarray(w_T, dtype=float)
    dt, T = spec.dt, spec.maturity
    out = np.empty(w_T.shape + (spec.steps,))
    prev = np.zeros_like(w_T)
    step = np.empty_like(w_T)
    for i in range(1, spec.steps):
        left = T - (i - 1) * dt
        sd = math.sqrt(dt * (T - i * dt) / left)
        # prev + dt * (w_T - prev) / left + sd * z, evaluated in place
        np.subtract(w_T, prev, out=step)
        step *= dt
        step /= left
        prev += step
        np.multiply(z[..., i - 1], sd, out=step)
        prev += step
        out[..., i - 1] = prev
    out[..., -1] = w_T
    return out


def brownian_bridge_path(w_T: float, spec: AsianOptionSpec, rng) -> np.ndarray:
    """``W`` at ``t_i = i T / steps``, ``i = 1..steps``, conditioned on ``W_T = w_T``."""
    z = rng.standard_normal(spec.steps - 1)
    return _bridge(float(w_T), z, spec)


def asian_payoff(path, spec: AsianOptionSpec):
    """Discounted payoff of one path (or a stack of paths along leading axes)."""
    W = np.asarray(path, dtype=float)
    if W.shape[-1] != spec.steps:
        raise ConfigurationError(f"path length {W.shape[-1]} != steps {spec.steps}")
    drift = (spec.rate - 0.5 * spec.vol**2) * spec.times
    S = W * spec.vol
    S += drift
    np.exp(S, out=S)
    S *= spec.s0_price
    avg = spec.dt * S.sum(axis=-1)
    out = math.exp(-spec.rate * spec.maturity) * np.maximum(avg - spec.strike * spec.maturity, 0.0)
    return float(out) if out.ndim == 0 else out


class AsianSampler:
    """Allocator-compatible problem with ``K`` equal-probability ``W_T`` bands."""

    def __init__(self, spec: AsianOptionSpec, K: int):
        self.spec = spec
        self.strata = quantile_strata(K)
        self.weights = np.full(K, 1.0 / K)
        self.K = K
        self.n_uniform = 1
        self.n_normal = spec.steps - 1

    def observe(self, strata, uniform, normal, runs=None):
        k = np.asarray(strata)
        w_T = _wT(k / self.K, (k + 1) / self.K, uniform[:, 0], self.spec.maturity)
        # elementwise bridge: a BLAS product would round differently with the batch size
        return asian_payoff(_bridge(w_T, normal, self.spec), self.spec)

    def take(self, sl: slice):
        return self


def asian_environment(spec: AsianOptionSpec, K: int) -> AsianSampler:
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    return AsianSampler(spec, K)


def reference_price(spec: AsianOptionSpec = AsianOptionSpec(), paths: int = REFERENCE_PATHS,
                    seed: int = REFERENCE_SEED, chunk: int = 10**5) -> tuple[float, float]:
    """Crude Monte Carlo price and its standard error."""
    from .rng import stream

    rng = stream(seed, 0)
    total = total_sq = 0.0
    done = 0
    while done < paths:
        m = min(chunk, paths - done)
        u = rng.random(m)
        z = rng.standard_normal((m, spec.steps - 1))
        x = asian_payoff(_bridge(_wT(0.0, 1.0, u, spec.maturity), z, spec), spec)
        total += float(x.sum())
        total_sq += float((x * x).sum())
        done += m
    mean = total / paths
    var = (total_sq / paths - mean * mean) * paths / (paths - 1)
    return mean, math.sqrt(var / paths)
