"""Vectorized Philox4x32-10 block function.

Counter-based generation: every output block is a pure function of a
128-bit counter and a 64-bit key, so any sample of any stream can be
drawn independently of every other one.
"""
from __future__ import annotations

import numba
import numpy as np

_MASK = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_ROUNDS = 10


def philox4x32(c0, c1, c2, c3, key: tuple[int, int]):
    """Apply Philox4x32-10 to broadcastable counter words.

    Counter words may be any integer arrays holding values below 2**32.
    Returns four ``uint64`` arrays holding 32-bit output words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (
            (p1 >> np.uint64(32)) ^ c1 ^ np.uint64(k0),
            p1 & _MASK,
            (p0 >> np.uint64(32)) ^ c3 ^ np.uint64(k1),
            p0 & _MASK,
        )
    return c0, c1, c2, c3


def words_to_unit(hi, lo) -> np.ndarray:
    """Combine two 32-bit words into a double in [0, 1) with 53 random bits."""
    a = (hi >> np.uint64(5)).astype(np.float64)
    b = (lo >> np.uint64(6)).astype(np.float64)
    return (a * 67108864.0 + b) / 9007199254740992.0


_U32 = np.uint64(0xFFFFFFFF)
_U5 = np.uint64(5)
_U6 = np.uint64(6)
_U32S = np.uint64(32)
_UW0 = np.uint64(_W0)
_UW1 = np.uint64(_W1)


@numba.njit(cache=True)
def _block(c0, c1, c2, c3, k0, k1):
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _UW0) & _U32
            k1 = (k1 + _UW1) & _U32
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (p1 >> _U32S) ^ c1 ^ k0, p1 & _U32, (p0 >> _U32S) ^ c3 ^ k1, p0 & _U32
    return c0, c1, c2, c3


@numba.njit(cache=True)
def complex_normals_kernel(k0, k1, samples, entries, c2, c3):
    """Box-Muller complex Gaussians for counter (entry, sample, c2, c3), shape (samples, entries)."""
    out = np.empty((samples.size, entries.size), dtype=np.complex128)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    c2 = np.uint64(c2)
    c3 = np.uint64(c3)
    for a in range(samples.size):
        s = np.uint64(samples[a])
        for b in range(entries.size):
            w0, w1, w2, w3 = _block(np.uint64(entries[b]), s, c2, c3, k0, k1)
            u1 = (float(w0 >> _U5) * 67108864.0 + float(w1 >> _U6)) / 9007199254740992.0
            u2 = (float(w2 >> _U5) * 67108864.0 + float(w3 >> _U6)) / 9007199254740992.0
            radius = np.sqrt(-np.log1p(-u1))
            angle = 2.0 * np.pi * u2
            out[a, b] = complex(radius * np.cos(angle), radius * np.sin(angle))
    return out
