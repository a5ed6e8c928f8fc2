"""Noisy evaluation model and a catalog of synthetic environments.

A query at ``x`` returns ``f(x) + s(x) * eps`` where ``eps`` has mean 0 and
variance 1.  Environments carry their Hölder constants ``(M, alpha)``, the
bound ``f_max`` on ``|f|`` and ``s``, and the noise scale ``b`` as declared
values; nothing is inferred from samples.

Mean and standard-deviation functions are vectorised: they map an ``(N, d)``
array of points to an ``(N,)`` array.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CatalogError, ConfigurationError, DimensionMismatchError

ArrayFn = Callable[[np.ndarray], np.ndarray]

NOISE_FAMILIES = ("gaussian-unit", "bounded-uniform", "bernoulli-residual")
_SQRT3 = math.sqrt(3.0)


def _bernoulli_range(p: float) -> float:
    q = 1.0 - p
    return max(math.sqrt(q / p), math.sqrt(p / q))


@dataclass(frozen=True)
class NoiseSpec:
    """Unit-variance noise family and its sub-Gaussian scale ``b``.

    ``gaussian-unit`` is N(0, 1); ``bounded-uniform`` is uniform on
    [-sqrt(3), sqrt(3)]; ``bernoulli-residual`` is (B - p) / sqrt(p(1-p)) with
    B ~ Bernoulli(p).
    """

    family: str = "gaussian-unit"
    b: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ConfigurationError(f"unknown noise family {self.family!r}")
        if self.family == "bernoulli-residual" and not 0.0 < self.p < 1.0:
            raise ConfigurationError("bernoulli-residual needs 0 < p < 1")
        if not self.b > 0:
            raise ConfigurationError("b must be positive")
        if self.b < self.min_b - 1e-12:
            raise ConfigurationError(
                f"b={self.b} too small for {self.family}; need b >= {self.min_b:.6g}"
            )

    @property
    def range_bound(self) -> float:
        """Largest possible ``|eps|`` (infinite for the Gaussian family)."""
        if self.family == "gaussian-unit":
            return math.inf
        if self.family == "bounded-uniform":
            return _SQRT3
        return _bernoulli_range(self.p)

    @property
    def min_b(self) -> float:
        return 1.0 if self.family == "gaussian-unit" else self.range_bound

    @property
    def n_uniform(self) -> int:
        return 0 if self.family == "gaussian-unit" else 1

    @property
    def n_normal(self) -> int:
        return 1 if self.family == "gaussian-unit" else 0

    def transform(self, uniform: np.ndarray, normal: np.ndarray) -> np.ndarray:
        """Map raw draws (last axis = variates) to noise values."""
        if self.family == "gaussian-unit":
            return normal[..., 0]
        u = uniform[..., 0]
        if self.family == "bounded-uniform":
            return _SQRT3 * (2.0 * u - 1.0)
        p = self.p
        return ((u < p).astype(float) - p) / math.sqrt(p * (1.0 - p))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        size = (size,) if np.isscalar(size) else tuple(size)
        u = rng.random(size + (self.n_uniform,))
        z = rng.standard_normal(size + (self.n_normal,))
        return self.transform(u, z)


@dataclass(frozen=True)
class Declared:
    """Declared regularity constants of an environment."""

    M: float
    alpha: float
    f_max: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError("Hölder exponent must lie in (0, 1]")
        if self.M < 0 or self.f_max < 0:
            raise ConfigurationError("M and f_max must be nonnegative")


def _validation_grid(dim: int, max_points: int = 4096) -> np.ndarray:
    res = max(2, int(math.floor(max_points ** (1.0 / dim))))
    return _regular_grid(dim, res)


def _regular_grid(dim: int, res: int) -> np.ndarray:
    axis = np.linspace(0.0, 1.0, res)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class Environment:
    """Stochastic evaluation oracle on ``[0, 1]^dim``."""

    dim: int
    mean_fn: ArrayFn
    std_fn: ArrayFn
    noise: NoiseSpec
    declared: Declared
    name: str = "custom"
    validate: bool = field(default=True, repr=False, compare=False)
    integral: float | None = field(default=None, compare=False)
    """Exact value of the integral of ``mean_fn`` when known."""

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("dimension must be positive")
        if not self.validate:
            return
        pts = _validation_grid(self.dim)
        f = np.asarray(self.mean_fn(pts), dtype=float)
        s = np.asarray(self.std_fn(pts), dtype=float)
        if f.shape != (len(pts),) or s.shape != (len(pts),):
            raise ConfigurationError("mean_fn/std_fn must map (N, d) arrays to (N,)")
        if np.any(s < 0):
            raise ConfigurationError("std_fn must be nonnegative")
        bound = self.declared.f_max * (1 + 1e-12) + 1e-15
        if np.max(np.abs(f)) > bound or np.max(s) > bound:
            raise ConfigurationError(
                f"declared f_max={self.declared.f_max} does not bound |f| and s on the grid"
            )

    @property
    def b(self) -> float:
        return self.noise.b

    def check_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected points of dimension {self.dim}, got shape {np.shape(x)}"
            )
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise DimensionMismatchError("points must lie in [0, 1]^d")
        return x


def evaluate(env: Environment, x, rng: np.random.Generator) -> float:
    """One noisy evaluation ``f(x) + s(x) * eps`` at a single point."""
    pts = env.check_points(x)
    if pts.shape[0] != 1:
        raise DimensionMismatchError("evaluate takes a single point")
    eps = env.noise.sample(rng, 1)
    return float(env.mean_fn(pts)[0] + env.std_fn(pts)[0] * eps[0])


# --------------------------------------------------------------------------
# catalog

def _coord_mean(x: np.ndarray) -> np.ndarray:
    return np.mean(x, axis=1)


@dataclass(frozen=True)
class _const:
    # a class rather than a lambda so catalog environments pickle
    c: float

    def __call__(self, x):
        return np.full(x.shape[0], float(self.c))


def _sine(x):
    return np.sin(2.0 * np.pi * _coord_mean(x)) / (2.0 * np.pi)


def _step(x):
    return (_coord_mean(x) >= 0.5).astype(float)


CATALOG_DOC = {
    "constant-noise(c)": "f = 0, s = c; M = 0, alpha = 1, f_max = c",
    "linear": "f = mean(x), s = 0; M = 1, alpha = 1, f_max = 1",
    "noiseless-linear": "alias of linear",
    "sine": "f = sin(2 pi mean(x)) / (2 pi), s = 0.5; M = 1, alpha = 1, f_max = 0.5",
    "step": "f = 1[mean(x) >= 1/2], s = 0.25; not Hölder (M = inf), f_max = 1",
    "heteroscedastic-ramp": "f = s = mean(x); M = 1, alpha = 1, f_max = 1",
}

_CONST_RE = re.compile(r"^constant-noise\(\s*([-+0-9.eE]+)\s*\)$")


def builtin_env(name: str, dim: int = 1, noise: NoiseSpec | None = None) -> Environment:
    """Build a catalog environment.

    Every entry depends on ``x`` only through the coordinate mean, so the
    one-dimensional formulas in ``CATALOG_DOC`` read with ``x`` replaced by
    ``mean(x)``.  The noise family defaults to ``gaussian-unit`` with b = 1.
    """
    noise = noise or NoiseSpec()
    key = name.strip()
    m = _CONST_RE.match(key)
    if m:
        c = float(m.group(1))
        if c < 0:
            raise CatalogError(f"constant-noise level must be nonnegative: {name!r}")
        return Environment(dim, _const(0.0), _const(c), noise, Declared(0.0, 1.0, c), key, integral=0.0)
    # mean(x) is symmetric about 1/2 under x -> 1 - x, which fixes every integral below
    if key in ("linear", "noiseless-linear"):
        return Environment(dim, _coord_mean, _const(0.0), noise, Declared(1.0, 1.0, 1.0), key, integral=0.5)
    if key == "sine":
        return Environment(dim, _sine, _const(0.5), noise, Declared(1.0, 1.0, 0.5), key, integral=0.0)
    if key == "step":
        return Environment(dim, _step, _const(0.25), noise, Declared(math.inf, 1.0, 1.0), key, integral=0.5)
    if key == "heteroscedastic-ramp":
        return Environment(dim, _coord_mean, _coord_mean, noise, Declared(1.0, 1.0, 1.0), key, integral=0.5)
    raise CatalogError(f"unknown environment {name!r}; known: {sorted(CATALOG_DOC)}")


def parse_noise(text: str, b: float | None = None) -> NoiseSpec:
    """Parse CLI noise strings: ``gaussian``, ``uniform``, ``bernoulli:<p>``."""
    t = text.strip().lower()
    if t in ("gaussian", "gaussian-unit", "normal"):
        return NoiseSpec("gaussian-unit", b if b is not None else 1.0)
    if t in ("uniform", "bounded-uniform"):
        return NoiseSpec("bounded-uniform", b if b is not None else _SQRT3)
    if t.startswith("bernoulli"):
        _, _, ptxt = t.partition(":")
        p = float(ptxt) if ptxt else 0.5
        return NoiseSpec("bernoulli-residual", b if b is not None else _bernoulli_range(p), p)
    raise ConfigurationError(f"unknown noise {text!r}")


@dataclass(frozen=True)
class HolderReport:
    max_ratio: float
    satisfied: bool


def verify_holder(env: Environment, grid_resolution: int) -> HolderReport:
    """Grid check of ``|g(x) - g(y)| <= M ||x - y||^alpha`` for g in {f, s}."""
    if grid_resolution < 2:
        raise ConfigurationError("grid_resolution must be >= 2")
    pts = _regular_grid(env.dim, grid_resolution)
    M, alpha = env.declared.M, env.declared.alpha
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    off = ~np.eye(len(pts), dtype=bool)
    worst = 0.0
    for g in (env.mean_fn, env.std_fn):
        v = np.asarray(g(pts), dtype=float)
        diff = np.abs(v[:, None] - v[None, :])[off]
        if math.isinf(M):
            continue
        if M == 0.0:
            ratio = 0.0 if np.all(diff == 0) else math.inf
        else:
            ratio = float(np.max(diff / (M * dist[off] ** alpha)))
        worst = max(worst, ratio)
    return HolderReport(worst, worst <= 1.0 + 1e-9)
