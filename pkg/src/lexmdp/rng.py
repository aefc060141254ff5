"""Counter-based 64-bit PRNG with splittable per-task streams.

SplitMix64 with the standard constants (increment 0x9E3779B97F4A7C15,
mixers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). Chosen because the
output is a pure function of the seed on every platform, and derived
streams let a batch hand independent generators to each task without
the draw order of one task affecting another.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

ALGORITHM = "splitmix64"


class SplitMix64:
    """Deterministic 64-bit generator; one instance per independent stream."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def float53(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def bernoulli(self, p: float) -> bool:
        return self.float53() < p

    def choice_index(self, k: int) -> int:
        """Uniform index in [0, k) without modulo bias (rejection sampling)."""
        if k <= 0:
            raise ValueError("empty choice")
        if k == 1:
            return 0
        limit = (1 << 64) - ((1 << 64) % k)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % k


def stream_seed(master: int, index: int) -> int:
    """Seed for the index-th derived stream of a batch."""
    return SplitMix64((master ^ (index * _GAMMA)) & _MASK).next_u64()
