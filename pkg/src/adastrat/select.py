"""Choosing the number of strata for a hyper-cubic partition.

For a Hölder exponent ``alpha`` the partition quality shrinks like
``K**(-alpha/d)`` while the MC-UCB regret grows like ``K**(1/3)``.  Balancing
the two gives ``K_n = floor(n**(1/(d + 3 alpha)))**d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError

_REL_TOL = 1e-12


@dataclass(frozen=True)
class StrataChoice:
    side_count: int
    k_n: int


def _check(n, d, alpha):
    if n < 1 or d < 1:
        raise ConfigurationError("need n >= 1 and d >= 1")
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError("alpha must lie in (0, 1]")


def choose_num_strata(n: int, d: int, alpha: float) -> StrataChoice:
    """Minimax strata count ``K_n = l**d`` with ``l = floor(n**(1/(d+3 alpha)))``.

    The floor is corrected for rounding so that exact powers (``n=16, d=1,
    alpha=1`` gives ``l=2``) are not lost, and ``l >= 1`` always, so tiny
    budgets fall back to crude Monte Carlo.
    """
    _check(n, d, alpha)
    e = d + 3.0 * alpha
    l = max(1, int(math.floor(n ** (1.0 / e))))
    # l**e <= n must hold, up to rounding in the power
    while l > 1 and l**e > n * (1 + _REL_TOL):
        l -= 1
    while (l + 1) ** e <= n * (1 + _REL_TOL):
        l += 1
    return StrataChoice(l, l**d)


def tradeoff_constant(M: float, b: float, f0_s0: float, sigma_N: float) -> float:
    """The explicit constant ``70 (1+M) Sigma sqrt(1+3b+4F^2) ((F+4)/4)**(1/3)``, ``F = f0_s0 + M``."""
    F = f0_s0 + M
    return 70.0 * (1 + M) * sigma_N * math.sqrt(1 + 3 * b + 4 * F**2) * ((F + 4) / 4) ** (1 / 3)


def rate_exponent(d: int, alpha: float) -> float:
    return -(d + 4.0 * alpha) / (d + 3.0 * alpha)


def tradeoff_bound(
    n: int,
    d: int,
    alpha: float,
    M: float = 1.0,
    b: float = 1.0,
    f0_s0: float = 0.0,
    constant: float | None = None,
    *,
    sigma_N: float = 1.0,
) -> float:
    """Bound on the excess risk of MC-UCB run with ``K_n`` strata.

    ``C d**(2a/(3d) + 1/2) sqrt(log n) n**(-(d+4a)/(d+3a)) (1 + d**a n**(-a/(d+3a)))``.
    ``constant=None`` uses :func:`tradeoff_constant` from ``M``, ``b``,
    ``f0_s0 = f(0) + s(0)`` and ``sigma_N``.
    """
    _check(n, d, alpha)
    if constant is None:
        constant = tradeoff_constant(M, b, f0_s0, sigma_N)
    e = d + 3.0 * alpha
    return (
        constant
        * d ** (2 * alpha / (3 * d) + 0.5)
        * math.sqrt(math.log(n))
        * n ** rate_exponent(d, alpha)
        * (1 + d**alpha * n ** (-alpha / e))
    )
