"""Portable seeded random number generation.

Two generators live here, both fixed algorithms so that every artifact
(model files, datasets, reports) reproduces bit-for-bit across platforms:

* ``Xoshiro256StarStar`` -- sequential generator used for weight
  initialization and dataset shuffling/splitting.
* ``keyed_normal`` -- counter-based Gaussian draw addressed by an integer
  key tuple. Output depends only on (seed, key), never on draw order,
  which is what makes noise draws pairable across anchor configurations.

Uniform doubles are built as ``(x >> 11) * 2**-53`` from 64-bit outputs;
Gaussians use the Box-Muller transform on two such uniforms.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_DOUBLE_SCALE = 2.0 ** -53


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (output, next_state)."""
    state = (state + _SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


class Xoshiro256StarStar:
    """xoshiro256** with splitmix64 seed expansion.

    Reference algorithm by Blackman & Vigna; implemented here directly so
    the stream is identical on every platform and Python version.
    """

    def __init__(self, seed: int):
        seed &= _MASK64
        state = []
        s = seed
        for _ in range(4):
            out, s = splitmix64(s)
            state.append(out)
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _DOUBLE_SCALE

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (unbiased)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            x = self.next_u64()
            if x <= limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def _mix_key(seed: int, key: tuple[int, ...]) -> int:
    h = seed & _MASK64
    for part in key:
        h ^= (part & _MASK64) * _SPLITMIX_GAMMA & _MASK64
        h, _ = splitmix64(h)
    return h


def keyed_normal(seed: int, *key: int) -> float:
    """Standard-normal draw addressed by (seed, key).

    Counter-based: the same (seed, key) always yields the same value, so
    callers may evaluate keys in any order, in parallel, or repeatedly.
    """
    state = _mix_key(seed, key)
    a, state = splitmix64(state)
    b, state = splitmix64(state)
    u1 = (a >> 11) * _DOUBLE_SCALE
    u2 = (b >> 11) * _DOUBLE_SCALE
    if u1 == 0.0:
        u1 = _DOUBLE_SCALE
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
