"""Deterministic random number generation.

All randomness in the toolkit flows through one small-state generator so that a run is
reproducible from a single root seed, and reproducible again in any other language that
implements the same algorithm. The generator is xoshiro256** seeded through splitmix64;
manifests record it as name "xoshiro256**" version 1.

Sub-streams ("dataset", "pool", ...) get independent seeds derived by hashing the root
seed together with the stream name, so adding a new consumer never shifts the draws an
existing consumer sees.
"""
from __future__ import annotations

import hashlib
import struct

GENERATOR_NAME = "xoshiro256**"
GENERATOR_VERSION = 1

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256** generator with convenience draws used across the toolkit."""

    def __init__(self, seed: int):
        if not isinstance(seed, int):
            raise TypeError("seed must be an int")
        state = seed & _MASK64
        s = []
        for _ in range(4):
            state, out = _splitmix64(state)
            s.append(out)
        self._s = s

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
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randrange(self, n: int) -> int:
        """Unbiased uniform integer in [0, n); rejection-sampled."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        # largest multiple of n that fits in 64 bits; draws past it would bias low values
        limit = (2 ** 64 // n) * n
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randbytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += struct.pack("<Q", self.next_u64())
        return bytes(out[:n])

    def choice(self, seq):
        if not seq:
            raise ValueError("choice from empty sequence")
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


def substream_seed(root_seed: int, name: str) -> int:
    """Derive the seed for a named sub-stream from the root seed.

    First 8 bytes (little-endian) of SHA-256 over the root seed and the stream name.
    """
    digest = hashlib.sha256(struct.pack("<Q", root_seed & _MASK64) + name.encode("utf-8")).digest()
    return struct.unpack("<Q", digest[:8])[0]


def substream(root_seed: int, name: str) -> Rng:
    return Rng(substream_seed(root_seed, name))
