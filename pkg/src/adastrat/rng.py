"""Deterministic random streams.

Every independent run owns a stream derived from ``(master_seed, *key)`` via
numpy's ``SeedSequence`` spawn-key hashing, feeding a PCG64 bit generator.
The same key always yields the same stream, regardless of how runs are
batched or distributed over worker processes.
"""

from __future__ import annotations

import numpy as np

DEFAULT_SEED = 20120917


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the PCG64 generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def streams(seed: int, keys) -> list[np.random.Generator]:
    return [stream(seed, *(k if isinstance(k, tuple) else (k,))) for k in keys]
