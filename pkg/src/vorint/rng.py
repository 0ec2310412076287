"""Reproducible, splittable random streams.

Every stream is a Philox counter-based generator keyed by a root seed and a
tuple of stream indices (replication, pixel, ...), so parallel workers can
derive independent generators without coordination.
"""

from __future__ import annotations

import numpy as np

Rng = np.random.Generator

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *stream: int) -> Rng:
    """Generator for ``(seed, *stream)``; identical keys give identical draws."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
