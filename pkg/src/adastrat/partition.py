"""Axis-aligned box partitions of the unit cube.

Strata are half-open boxes ``[lower, upper)`` except on the top face of the
unit cube, which is closed, so every point of ``[0, 1]^d`` belongs to exactly
one stratum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CapacityError, ConfigurationError, DimensionMismatchError

MAX_STRATA = 2**24


@dataclass(frozen=True)
class Stratum:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    weight: float

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise DimensionMismatchError("lower/upper length mismatch")
        if any(not lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise ConfigurationError("stratum needs lower < upper on every axis")
        vol = math.prod(hi - lo for lo, hi in zip(self.lower, self.upper))
        if not math.isclose(vol, self.weight, rel_tol=1e-12):
            raise ConfigurationError(f"weight {self.weight} differs from box volume {vol}")

    @classmethod
    def box(cls, lower, upper) -> "Stratum":
        lower = tuple(float(v) for v in lower)
        upper = tuple(float(v) for v in upper)
        return cls(lower, upper, math.prod(h - l for l, h in zip(lower, upper)))

    @property
    def dim(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class Partition:
    dim: int
    strata: tuple[Stratum, ...]
    kind: str = "general"
    side_count: int | None = None

    def __post_init__(self):
        if any(s.dim != self.dim for s in self.strata):
            raise DimensionMismatchError("stratum dimension differs from partition")
        total = math.fsum(s.weight for s in self.strata)
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"stratum weights sum to {total}, not 1")

    def __len__(self) -> int:
        return len(self.strata)

    @property
    def K(self) -> int:
        return len(self.strata)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.array([s.weight for s in self.strata])
        w.flags.writeable = False
        return w

    @cached_property
    def lowers(self) -> np.ndarray:
        a = np.array([s.lower for s in self.strata], dtype=float).reshape(self.K, self.dim)
        a.flags.writeable = False
        return a

    @cached_property
    def uppers(self) -> np.ndarray:
        a = np.array([s.upper for s in self.strata], dtype=float).reshape(self.K, self.dim)
        a.flags.writeable = False
        return a


def make_hypercubic(dim: int, side_count: int) -> Partition:
    """``side_count**dim`` equal cubes, indexed row-major (first axis slowest)."""
    if dim < 1 or side_count < 1:
        raise ConfigurationError("need dim >= 1 and side_count >= 1")
    K = side_count**dim
    if K > MAX_STRATA:
        raise CapacityError(f"{side_count}^{dim} = {K} strata exceeds {MAX_STRATA}")
    edges = [c / side_count for c in range(side_count)] + [1.0]
    w = 1.0 / K
    strata = []
    for flat in range(K):
        idx = np.unravel_index(flat, (side_count,) * dim)
        lo = tuple(edges[i] for i in idx)
        hi = tuple(edges[i + 1] for i in idx)
        strata.append(Stratum(lo, hi, w))
    return Partition(dim, tuple(strata), "hypercubic", side_count)


def partition_for_k(dim: int, K: int) -> Partition:
    """Hypercubic partition with exactly ``K`` strata; ``K`` must be a d-th power."""
    l = round(K ** (1.0 / dim))
    for cand in (l - 1, l, l + 1):
        if cand >= 1 and cand**dim == K:
            return make_hypercubic(dim, cand)
    raise ConfigurationError(f"K={K} is not a perfect {dim}-th power")


def _upper_open(upper: np.ndarray, lower: np.ndarray) -> np.ndarray:
    # largest float strictly below the upper face, except on the closed top face
    below = np.nextafter(upper, lower)
    return np.where(upper >= 1.0, upper, below)


def sample_uniform(stratum: Stratum, rng: np.random.Generator, size: int | None = None):
    """Uniform point(s) in the stratum; ``size=None`` returns a single point."""
    lo = np.asarray(stratum.lower)
    hi = np.asarray(stratum.upper)
    shape = (stratum.dim,) if size is None else (size, stratum.dim)
    u = rng.random(shape)
    return place(u, lo, hi)


def place(u: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Map unit-cube draws into boxes, staying inside the half-open box."""
    x = lo + u * (hi - lo)
    return np.minimum(x, _upper_open(hi, lo))


def diameter(stratum: Stratum) -> float:
    return math.dist(stratum.lower, stratum.upper)


def refine(partition: Partition, index: int, axis: int) -> Partition:
    """Split stratum ``index`` in half along ``axis``.

    The lower half keeps position ``index``; the upper half is inserted right
    after it.
    """
    if not 0 <= index < partition.K:
        raise ConfigurationError(f"stratum index {index} out of range")
    if not 0 <= axis < partition.dim:
        raise ConfigurationError(f"axis {axis} out of range")
    s = partition.strata[index]
    mid = 0.5 * (s.lower[axis] + s.upper[axis])
    if not s.lower[axis] < mid < s.upper[axis]:
        raise CapacityError("stratum too thin to split further")
    lo_hi = list(s.upper)
    lo_hi[axis] = mid
    hi_lo = list(s.lower)
    hi_lo[axis] = mid
    a = Stratum(s.lower, tuple(lo_hi), s.weight / 2)
    b = Stratum(tuple(hi_lo), s.upper, s.weight / 2)
    strata = partition.strata[:index] + (a, b) + partition.strata[index + 1 :]
    return Partition(partition.dim, strata, "general")


def stratum_of(partition: Partition, x) -> int:
    """Index of the stratum containing ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (partition.dim,):
        raise DimensionMismatchError(f"expected a point of dimension {partition.dim}")
    lo, hi = partition.lowers, partition.uppers
    inside = np.all((lo <= x) & ((x < hi) | ((hi >= 1.0) & (x <= 1.0))), axis=1)
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        raise DimensionMismatchError(f"point {x} is outside [0, 1]^d")
    return int(hits[0])
