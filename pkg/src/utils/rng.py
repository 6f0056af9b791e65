"""
Seeded Random Streams

Every random draw flows from a single run seed. Each purpose (initialisation,
shuffling, sampling, ...) gets its own independent stream so that adding
draws for one purpose never perturbs another.
"""

import zlib
from typing import Union

import numpy as np


def stream_key(purpose: str) -> int:
    """Stable integer key for a named purpose."""
    return zlib.crc32(purpose.encode("utf-8"))


def make_rng(seed: int, purpose: str, *extra: Union[int, str]) -> np.random.Generator:
    """
    Create the generator for one purpose of one run.

    Args:
        seed: Run seed
        purpose: Stream name, e.g. "init" or "shuffle"
        extra: Further integers or names to split the stream (job index, group)

    Returns:
        numpy Generator
    """
    keys = [stream_key(purpose)]
    for item in extra:
        keys.append(stream_key(item) if isinstance(item, str) else int(item))
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(keys))
    return np.random.default_rng(seq)
