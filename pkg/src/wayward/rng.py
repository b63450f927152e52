"""Portable deterministic random number generation.

Simulation logs must be reproducible bit-for-bit from a recorded seed, on any
platform and in any reimplementation, so the generator cannot be whatever the
host language happens to ship.  This module pins one tiny, publicly documented
algorithm: splitmix64 (Steele, Lea & Flood's SplittableRandom finalizer, as
popularized by Vigna).  State is a single 64-bit word; one step is

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
    z = (z XOR (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
    output = z XOR (z >> 31)

Floats take the top 53 bits; bounded integers use rejection sampling so every
value is exactly equally likely.  Log headers record ``generator=splitmix64``.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

GENERATOR_NAME = "splitmix64"


class SplitMix64:
    """Seedable splitmix64 stream. Seeds are reduced mod 2^64."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n). Rejection sampling, no modulo bias."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        threshold = ((_MASK64 + 1) // n) * n
        while True:
            u = self.next_u64()
            if u < threshold:
                return u % n

    def weighted_index(self, weights) -> int:
        """Index drawn proportionally to nonnegative weights (sum > 0)."""
        total = 0.0
        for w in weights:
            if w < 0:
                raise ValueError("weights must be nonnegative")
            total += w
        if total <= 0.0:
            raise ValueError("weights must not all be zero")
        u = self.random() * total
        acc = 0.0
        last = 0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
            if w > 0:
                last = i
        return last

    def clone(self) -> "SplitMix64":
        copy = SplitMix64(0)
        copy.state = self.state
        return copy


def derive_seed(seed: int, stream: int) -> int:
    """Independent child seed for a named substream of a master seed.

    Runs one splitmix64 step over the master seed offset by the stream id, so
    substreams never overlap the parent sequence for practical stream lengths.
    """
    return SplitMix64((seed ^ (stream * 0xA5A5A5A5A5A5A5A5)) & _MASK64).next_u64()
