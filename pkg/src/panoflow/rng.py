"""Minimal PCG32 generator with a portable, exactly specified stream.

Grain placement must be reproducible from a seed across every component
that renders the overlay, including ones not written in Python, so it
cannot depend on any particular library's generator.  This is the
standard PCG-XSH-RR 32-bit variant; given the same seed and stream it
yields the same 32-bit outputs in any conforming implementation.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_MULT = 6364136223846793005
DEFAULT_STREAM = 54


class Pcg32:
    """PCG-XSH-RR with 64-bit state and 32-bit output."""

    def __init__(self, seed: int, stream: int = DEFAULT_STREAM):
        self._inc = (((stream << 1) | 1)) & _MASK64
        self._state = 0
        self.next_u32()
        self._state = (self._state + (seed & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self._state
        self._state = (old * _MULT + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & 0xFFFFFFFF

    def uniform(self) -> float:
        """Float in [0, 1) with 32-bit resolution."""
        return self.next_u32() / 4294967296.0


def fnv1a32(data: bytes) -> int:
    """FNV-1a 32-bit hash; used for portable grain-layout checksums."""
    h = 2166136261
    for byte in data:
        h ^= byte
        h = (h * 16777619) & 0xFFFFFFFF
    return h
