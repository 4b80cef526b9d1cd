"""
Counter-based random streams.

Every draw in mssk comes from a Philox generator keyed by (seed, replica, field, level),
so a replica's randomness does not depend on which worker runs it or in which order.
"""

from enum import IntEnum

import numpy as np


class Field(IntEnum):
    CASCADE = 1
    TREE_FIELD = 2
    COUPLINGS = 3
    CAVITY = 4
    PAIRS = 5
    NESTED = 6
    OPTIMIZER = 7
    PROBE = 8
    TRIALS = 9


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the given key path under a 64-bit seed."""
    if seed < 0:
        raise ValueError(f"seed must be a nonnegative 64-bit integer, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))
