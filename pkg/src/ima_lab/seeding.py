"""Deterministic sub-seed derivation for parallel Monte Carlo trials.

One master 64-bit seed drives a whole run.  Stream ``i`` gets the
counter-mixed sub-seed ``mix64(master, i)``, so trials can be scheduled
in any order (or on any number of workers) and still draw identical
numbers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(master: int, counter: int) -> int:
    """Avalanche mix of a master seed and a stream counter (splitmix64 finalizer)."""
    z = (int(master) + (int(counter) + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def substream(master: int, *counters: int) -> int:
    """Derive a sub-seed from a master seed and a path of stream counters."""
    seed = int(master) & _MASK64
    for c in counters:
        seed = mix64(seed, c)
    return seed


def generator(master: int, *counters: int) -> np.random.Generator:
    """A fresh PCG64 generator for the given seed path."""
    return np.random.Generator(np.random.PCG64(substream(master, *counters)))
