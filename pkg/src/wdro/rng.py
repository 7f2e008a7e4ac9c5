"""Keyed random streams.

A stream is a Philox (counter-based) generator whose key is derived from a
user seed plus a tuple of integers such as ``(n, trial)``. Streams with
different keys are statistically independent and can be created in any order
or on any thread without changing their output.
"""
from __future__ import annotations

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seed and stream keys must be nonnegative integers")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
