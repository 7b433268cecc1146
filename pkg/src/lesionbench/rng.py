"""Seed derivation and random generators.

Every random draw in the package goes through :func:`generator`, a
counter-based Philox stream keyed by a 64-bit seed.  Child seeds are derived
with :func:`mix`, a SplitMix64 finaliser over ``(seed, index)``, so work split
across processes produces the same values as a serial run.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output step for state ``x``."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(seed: int, index: int) -> int:
    """Derive the child seed for ``index`` from a parent ``seed``."""
    if index < 0:
        raise ValueError(f"index must be non-negative, got {index}")
    return splitmix64(splitmix64(seed & MASK64) ^ (index & MASK64))


def generator(seed: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & MASK64))
