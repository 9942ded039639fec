"""Deterministic PRNG: splitmix64 seeding xoshiro256++, normals via Box-Muller.

The scalar generator follows the published splitmix64 and xoshiro256++
sequences exactly (pure-integer arithmetic, 64-bit wrapping), so streams are
reproducible across platforms and languages.  Bulk normal fields come from a
bank of xoshiro256++ streams whose states are drawn from a splitmix64 chain;
the bank is advanced with vectorized uint64 numpy ops, each lane individually
following the standard sequence.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_BANK = 4096  # lanes used by normals(); fixed so results depend only on (state, n)


def _mix64(z: int) -> int:
    """splitmix64 output function for an already-advanced state."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def splitmix64(state: int):
    """One splitmix64 step: returns (next_state, output)."""
    state = (state + _GOLDEN) & _MASK
    return state, _mix64(state)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def _mix64_vec(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _xoshiro_step_vec(s0, s1, s2, s3):
    """Vectorized xoshiro256++ step over lane arrays; returns (out, new state)."""
    t = s0 + s3
    out = ((t << np.uint64(23)) | (t >> np.uint64(41))) + s0
    t = s1 << np.uint64(17)
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
    return out, s0, s1, s2, s3


class Rng:
    """xoshiro256++ generator seeded from a splitmix64 chain."""

    __slots__ = ("state", "_spare")

    def __init__(self, seed: int):
        s = int(seed) & _MASK
        words = []
        for _ in range(4):
            s, out = splitmix64(s)
            words.append(out)
        if not any(words):
            words[0] = 1  # xoshiro forbids the all-zero state
        self.state = tuple(words)
        self._spare = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.state
        out = (_rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.state = (s0, s1, s2, s3)
        return out

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n).  Modulo draw; fine for the tiny n used here."""
        if n <= 0:
            raise ValueError("next_below needs n >= 1")
        return self.next_u64() % n

    def next_normal(self) -> float:
        """Standard normal via the Box-Muller pair (second value cached)."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # (0, 1]
        u2 = (self.next_u64() >> 11) * 2.0**-53  # [0, 1)
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def split(self) -> "Rng":
        """Child generator seeded from the next output of this one."""
        return Rng(self.next_u64())

    def normals(self, shape, dtype=np.float32) -> np.ndarray:
        """Standard-normal array from a bank of derived xoshiro256++ streams.

        One u64 is drawn from this generator as the bank root, so successive
        calls produce fresh fields.  Lane states come from the splitmix64
        chain of the root; values are taken round-robin across lanes.  The
        sequence differs from repeated next_normal() by construction.
        """
        n = int(np.prod(shape)) if np.ndim(shape) else int(shape)
        if n == 0:
            return np.zeros(shape, dtype=dtype)
        root = self.next_u64()
        pairs = (n + 1) // 2
        lanes = min(_BANK, pairs)
        chain = (np.uint64(root)
                 + (np.arange(1, 4 * lanes + 1, dtype=np.uint64)) * np.uint64(_GOLDEN))
        words = _mix64_vec(chain).reshape(lanes, 4)
        s0, s1, s2, s3 = (words[:, i].copy() for i in range(4))
        dead = (s0 | s1 | s2 | s3) == 0
        if dead.any():
            s0[dead] = np.uint64(1)
        rounds = 2 * (-(-pairs // lanes))
        u = np.empty((rounds, lanes), dtype=np.uint64)
        for r in range(rounds):
            u[r], s0, s1, s2, s3 = _xoshiro_step_vec(s0, s1, s2, s3)
        u1 = u[0::2].ravel()[:pairs]
        u2 = u[1::2].ravel()[:pairs]
        f1 = ((u1 >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        f2 = (u2 >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(f1))
        ang = 2.0 * np.pi * f2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(ang)
        out[1::2] = r * np.sin(ang)
        return out[:n].astype(dtype).reshape(shape)
