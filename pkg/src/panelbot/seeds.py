"""Fixed derivation of named sub-seeds from one command-level seed."""
from __future__ import annotations

import zlib

import numpy as np


def derive_seed(seed: int, *names) -> int:
    """A 63-bit seed that depends only on ``seed`` and the name path."""
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for name in names:
        words.append(zlib.crc32(str(name).encode("utf-8")))
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0]) & ((1 << 63) - 1)


def rng_for(seed: int, *names) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *names))
