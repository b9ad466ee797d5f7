"""Deterministic, portable random number generation.

Weight initialization and synthetic data must be bit-reproducible from
a 64-bit seed, with no dependence on any host library's generator. The
scheme, in full, so other implementations can match it byte for byte:

  * splitmix64 expands a 64-bit seed into the four 64-bit words of
    xoshiro256** state (standard constants; all-zero state is remapped
    to state word s0 = 1).
  * xoshiro256** produces the u64 stream.
  * A uniform float in [0, 1) is (u64 >> 40) / 2^24, i.e. the top 24
    bits, computed in double precision.
  * uniform(lo, hi) = lo + (hi - lo) * u, computed in double precision
    and rounded to float32 at the end.
  * Named streams: stream_for(seed, name) seeds a fresh generator with
    seed XOR fnv1a64(name), so every tensor or case draws from its own
    well-defined stream regardless of generation order elsewhere.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31), state


def fnv1a64(name: str) -> int:
    """FNV-1a hash of a UTF-8 string, 64-bit."""
    h = 0xCBF29CE484222325
    for byte in name.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    """xoshiro256** with splitmix64 seeding."""

    def __init__(self, seed: int):
        state = seed & _MASK
        words = []
        for _ in range(4):
            word, state = splitmix64(state)
            words.append(word)
        if not any(words):
            words[0] = 1
        self._s = words

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """n float32 values uniform in [lo, hi)."""
        scale = (hi - lo) / float(1 << 24)
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = lo + scale * (self.next_u64() >> 40)
        return out.astype(np.float32)

    def integers(self, n: int, lo: int, hi: int) -> list[int]:
        """n ints uniform in [lo, hi), by rejection-free modulo of the top bits."""
        span = hi - lo
        if span <= 0:
            raise ValueError(f"empty integer range [{lo}, {hi})")
        return [lo + (self.next_u64() >> 40) % span for _ in range(n)]


def stream_for(seed: int, name: str) -> Xoshiro256StarStar:
    """Independent named generator derived from a base seed."""
    return Xoshiro256StarStar((seed & _MASK) ^ fnv1a64(name))
