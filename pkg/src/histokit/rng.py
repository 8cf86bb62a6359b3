"""Deterministic seed derivation.

All randomized operations take an explicit integer seed; sub-streams (per
tile, per patch, per tree) are derived with splitmix64 so parallel generation
is order-independent and reproducible across platforms.
"""

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(*parts):
    """Mix any number of integers into one 64-bit seed."""
    state = 0
    for p in parts:
        state = splitmix64(state ^ (int(p) & _MASK))
    return state


def generator(*parts):
    """Seeded numpy Generator for the given seed parts."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
