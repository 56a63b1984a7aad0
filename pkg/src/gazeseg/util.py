"""Seed-substream plumbing: one master seed, named independent generators."""
from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, *names) -> np.random.Generator:
    """Deterministic generator derived from the master seed and a name path."""
    entropy = [int(seed)] + [zlib.crc32(str(n).encode("utf-8")) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def substream_seed(seed: int, *names) -> int:
    """A 32-bit integer seed for consumers that take plain seeds."""
    return int(substream(seed, *names).integers(0, 2**32))
