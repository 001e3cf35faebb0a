"""SplitMix64 generator, pinned so seeds reproduce across runs and platforms."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO64 = float(1 << 64)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Scalar and bulk draws share one state; ``uniform(n)`` equals n calls of ``random()``."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return _mix(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1): next() / 2**64."""
        return self.next_u64() / _TWO64

    def uniform(self, n: int) -> np.ndarray:
        if n <= 0:
            return np.empty(0, dtype=np.float64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GOLDEN) & _MASK
        # uint64 -> float64 rounds to nearest, same as int -> float for the scalar path
        return z.astype(np.float64) / _TWO64

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def below(self, n: int) -> int:
        """Integer in [0, n) via floor(u * n)."""
        return min(int(self.random() * n), n - 1)

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of range(n), drawing from the high index down."""
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
