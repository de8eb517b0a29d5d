"""
Reproducible random number streams.

Every random draw of a run comes from a counter-based Philox generator keyed
by the master seed and a spawn key such as (iteration, stream). A stream
therefore depends only on its key, never on the order in which other streams
were consumed.
"""

from enum import IntEnum
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator]


class Stream(IntEnum):
    """Named substreams of a chain iteration."""
    INIT = 0
    SCALE = 1
    MODEL = 2
    BRIDGES = 3
    SIMULATION = 4


def get_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Get a generator for the substream identified by ``keys``.

    Args:
        seed: Master seed
        keys: Spawn key, e.g. (iteration, Stream.MODEL)

    Returns:
        numpy Generator backed by Philox
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def as_generator(seed: SeedLike) -> np.random.Generator:
    """Accept either a seed or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return get_rng(seed)
