"""Portable seeded generator: xorshift64* state seeded through SplitMix64.

Pure integer arithmetic, so a given seed yields the same stream on every
platform and numpy version.

xorshift64* (Vigna 2014): shifts (12, 25, 27), output multiplier
0x2545F4914F6CDD1D.  SplitMix64: increment 0x9E3779B97F4A7C15, mixers
0xBF58476D1CE4E5B9 and 0x94D049BB133111EB with shifts (30, 27, 31).
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> tuple[int, int]:
    """One SplitMix64 step. Returns (new_state, output)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int = 0):
        _, state = splitmix64(seed & MASK64)
        # all-zero state is a fixed point of xorshift
        self._s = state or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._s
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._s = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float, shape=()) -> np.ndarray | float:
        if shape == ():
            return lo + (hi - lo) * self.random()
        n = int(np.prod(shape))
        draws = np.array([self.random() for _ in range(n)], dtype=float)
        return (lo + (hi - lo) * draws).reshape(shape)
