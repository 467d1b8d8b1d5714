"""Named random streams derived from one user seed."""

from __future__ import annotations

import zlib

import numpy as np

SEED_ENV = "JUDGECAL_SEED"


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def stream(seed: int, *keys) -> np.random.Generator:
    """Generator for ``(seed, *keys)``; keys may be ints or names.

    Streams with different key paths are independent, so results do not
    depend on the order in which work units are scheduled.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(_key, keys)]))


def derive_seed(seed: int, *keys) -> int:
    return int(np.random.SeedSequence([int(seed), *map(_key, keys)]).generate_state(1, np.uint64)[0])
