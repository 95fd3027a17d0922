"""Seed stream-splitting.

Every stochastic operation in the toolkit derives its generator from one
root seed plus a tuple of stream tags (strings are hashed with crc32,
integers pass through).  Identical (seed, tags) always yields the same
generator state, independent of call order or thread count.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    if isinstance(tag, str):
        return zlib.crc32(tag.encode("utf-8"))
    raise TypeError(f"rng stream tag must be int or str, got {type(tag).__name__}")


def child_rng(seed: int, *tags) -> np.random.Generator:
    """Derive a generator for the stream identified by ``tags`` under ``seed``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
