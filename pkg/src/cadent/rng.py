"""Deterministic pseudo-random streams shared by every training backend.

The generator is xorshift128 (Marsaglia 2003) over four 32-bit words. Words
are kept in an int64 array and every operation masks back to 32 bits, so the
arithmetic is exact and identical whether the functions run under CPython or
compiled. Streams are derived from a (seed, stream) pair with a murmur-style
finalizer, which keeps runs independent without any global state.
"""

from __future__ import annotations

import numpy as np

_MASK32 = 0xFFFFFFFF
_INV_2_32 = 2.0 ** -32


def mulmod32(x, c):
    """(x * c) mod 2**32 without intermediate products overflowing int64."""
    lo = (x & 0xFFFF) * c
    hi = (((x >> 16) * c) & 0xFFFF) << 16
    return (lo + hi) & _MASK32


def fmix32(h):
    """murmur3 32-bit finalizer; bijective avalanche over [0, 2**32)."""
    h = h & _MASK32
    h ^= h >> 16
    h = mulmod32(h, 0x85EBCA6B)
    h ^= h >> 13
    h = mulmod32(h, 0xC2B2AE35)
    h ^= h >> 16
    return h


def state_from(seed, stream=0):
    """Build an xorshift128 state array from a seed and a stream index.

    Distinct (seed, stream) pairs give independent trajectories; the same
    pair always yields the same state. Negative inputs are rejected so that
    serialized configs round-trip without sign surprises.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    s_lo = seed & _MASK32
    s_hi = (seed >> 32) & _MASK32
    t = stream & _MASK32
    state = np.zeros(4, dtype=np.int64)
    state[0] = fmix32(s_lo ^ 0x9E3779B9)
    state[1] = fmix32(s_hi ^ 0x85EBCA77)
    state[2] = fmix32(t ^ 0xC2B2AE3D)
    state[3] = fmix32((s_lo ^ (t << 1)) + 0x27D4EB2F)
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[3] = 0x6D2B79F5  # xorshift128 must not start at the zero state
    return state


def xs128_next(state):
    """Advance the state in place and return the next word in [0, 2**32)."""
    t = state[0]
    t = (t ^ (t << 11)) & _MASK32
    state[0] = state[1]
    state[1] = state[2]
    state[2] = state[3]
    w = state[3]
    w = (w ^ (w >> 19)) ^ (t ^ (t >> 8))
    state[3] = w & _MASK32
    return state[3]


def uniform(state):
    """Next float in [0, 1) with 32 bits of resolution."""
    return xs128_next(state) * _INV_2_32


def randint(state, n):
    """Next integer in [0, n). Consumes exactly one word."""
    return int(uniform(state) * n)


class RandomState:
    """Convenience wrapper around a raw state array."""

    def __init__(self, seed, stream=0):
        self.state = state_from(seed, stream)

    def next_u32(self):
        return int(xs128_next(self.state))

    def uniform(self):
        return uniform(self.state)

    def randint(self, n):
        if n <= 0:
            raise ValueError("n must be positive")
        return randint(self.state, n)

    def shuffle(self, items):
        """Fisher-Yates, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = randint(self.state, i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def choice(self, items):
        return items[self.randint(len(items))]
