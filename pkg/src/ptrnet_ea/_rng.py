"""Keyed random streams.

Every stochastic choice draws from a Philox4x64 counter-based generator whose
key is derived with ``numpy.random.SeedSequence`` from the master seed plus a
tuple of integers naming the purpose (iteration, individual, ...). The stream
for a given key never depends on how many other streams were consumed before,
which is what makes sharding, resuming and worker-count independence exact.
"""
from __future__ import annotations

import numpy as np

# stream tags; small integers mixed into the SeedSequence entropy
TAG_INSTANCE = 1
TAG_INIT = 2
TAG_BATCH = 3
TAG_LAMBDA = 4
TAG_MUTATE = 5
TAG_DECODE = 6

SPLIT_CODES = {"train": 0, "test": 1}


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *key)``."""
    if seed < 0 or any(k < 0 for k in key):
        raise ValueError("seeds and stream keys must be non-negative integers")
    ss = np.random.SeedSequence([int(seed), *map(int, key)])
    return np.random.Generator(np.random.Philox(ss))
