"""Per-trajectory random streams.

Each trajectory owns a Philox4x64 generator keyed by (master_seed, index), so a
trajectory's draws depend only on those two integers and never on scheduling.
Philox is a counter-based generator with a fixed, platform-independent
algorithm.
"""

from __future__ import annotations

import numpy as np

_INDEX_BITS = 64


def trajectory_key(master_seed: int, index: int) -> int:
    if master_seed < 0 or index < 0:
        raise ValueError("master_seed and index must be non-negative")
    if master_seed >= 1 << 64 or index >= 1 << _INDEX_BITS:
        raise ValueError("master_seed and index must fit in 64 bits")
    return (master_seed << _INDEX_BITS) | index


def trajectory_generator(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=trajectory_key(master_seed, index)))


def open_unit(rng: np.random.Generator) -> float:
    """Uniform draw in the open interval (0, 1)."""
    while True:
        value = float(rng.random())
        if value > 0.0:
            return value
