"""Seed derivation: every component draws from its own stream.

``stream(seed, "mechanism")`` and ``stream(seed, "ldp")`` are independent
generators derived from the same master seed by mixing in a CRC32 of the
component name, so adding threads or reordering work never changes results.
"""

from __future__ import annotations

import zlib

import numpy as np


def component_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Generator for component ``name`` (plus optional integer sub-keys) under ``seed``."""
    if seed is None:
        raise ValueError("a seed is required for reproducible streams")
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, component_key(name), *[int(e) for e in extra]]
    return np.random.default_rng(np.random.SeedSequence(entropy))
