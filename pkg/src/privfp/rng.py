"""Counter-based random substreams.

Every random quantity in a run is drawn from a Philox generator keyed by
``(seed, domain)`` and positioned at a counter derived from the iteration
index and block/user index. Streams for distinct ``(domain, k, b)`` never
overlap, so noise assignment is independent of block schedules, sampling
order, and any parallel evaluation: replaying ``(seed, k, b)`` always
reproduces the same draw.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

# Domain tags keep noise, schedule, and data streams disjoint under one seed.
NOISE = 0x01
SCHEDULE = 0x02
DATA = 0x03


def substream(seed: int, domain: int, k: int, b: int) -> np.random.Generator:
    """Generator for the (domain, iteration k, block b) substream of seed."""
    key = np.array([seed & _MASK64, domain & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, k & _MASK64, b & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def noise_rng(seed: int, k: int, b: int) -> np.random.Generator:
    return substream(seed, NOISE, k, b)


def schedule_rng(seed: int, k: int, tag: int = 0) -> np.random.Generator:
    return substream(seed, SCHEDULE, k, tag)


def gaussian_block(seed: int, k: int, b: int, sigma: float, size: int) -> np.ndarray:
    """Fresh N(0, sigma^2 I_size) draw from the (k, b) noise substream."""
    if sigma == 0.0:
        return np.zeros(size)
    return noise_rng(seed, k, b).normal(0.0, sigma, size)
