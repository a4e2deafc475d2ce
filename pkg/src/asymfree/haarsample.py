"""Reproducible sampling from Haar measure on U(k).

Every Gaussian entry is a pure function of
(master_seed, stream_index, sample index, component, entry, redraw round)
through a Philox4x32-10 counter RNG keyed by the master seed, so batches
can be produced in any order or in parallel and still agree bit for bit.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._philox import complex_normals_kernel
from .errors import DimensionMismatchError
from .matcore import check_unitary

__all__ = [
    "SeededStream",
    "CHUNK",
    "resolve_threads",
    "ginibre",
    "haar_from_ginibre",
    "sample_unitary",
    "sample_tuple",
    "sample_batch",
    "InvarianceReport",
    "invariance_report",
]

CHUNK = 512  # fixed work-unit size; never depends on the thread count
_MAX_ROUNDS = 0xFFFF
_DEGENERATE = 1e-12


def resolve_threads(threads: int | None = None) -> int:
    """ASYMFREE_THREADS wins, then the explicit value, then the CPU count."""
    env = os.environ.get("ASYMFREE_THREADS")
    if env:
        return max(1, int(env))
    if threads:
        return max(1, int(threads))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SeededStream:
    """A (master_seed, stream_index) pair naming an independent family of draws."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.stream_index < 2**32:
            raise ValueError("stream_index must fit in 32 bits")

    @property
    def key(self) -> tuple[int, int]:
        s = self.master_seed % 2**64
        return s & 0xFFFFFFFF, s >> 32

    def complex_normals(self, samples, component: int, entries: np.ndarray, rounds=0) -> np.ndarray:
        """Standard complex Gaussians (E|z|^2 = 1) by Box-Muller.

        Returns shape (len(samples), len(entries)); ``rounds`` selects redraws.
        """
        samples = np.asarray(samples, dtype=np.uint64)
        if samples.size and int(samples.max()) >= 2**32:
            raise ValueError("sample index must fit in 32 bits")
        if not 0 <= rounds <= _MAX_ROUNDS:
            raise ValueError("redraw round out of range")
        c2 = (component & 0xFFFF) | (rounds << 16)
        k0, k1 = self.key
        flat_s = np.ascontiguousarray(samples.reshape(-1))
        flat_e = np.ascontiguousarray(np.asarray(entries, dtype=np.uint64).reshape(-1))
        return complex_normals_kernel(k0, k1, flat_s, flat_e, c2, self.stream_index)


def ginibre(k: int, stream: SeededStream, samples, component: int = 0) -> np.ndarray:
    """Ginibre matrices, shape (len(samples), k, k)."""
    samples = np.atleast_1d(np.asarray(samples, dtype=np.uint64))
    entries = np.arange(k * k, dtype=np.uint64)
    return stream.complex_normals(samples, component, entries).reshape(samples.size, k, k)


def haar_from_ginibre(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR-orthonormalize and fix column phases so R has a positive diagonal.

    Returns (Q, diag R) for a stack of square matrices.
    """
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1).copy()
    mod = np.abs(d)
    phase = np.where(mod > 0, d / np.where(mod > 0, mod, 1.0), 1.0)
    return q * phase[..., None, :], d


def _haar_batch(k: int, stream: SeededStream, samples: np.ndarray, component: int) -> np.ndarray:
    z = ginibre(k, stream, samples, component)
    q, d = haar_from_ginibre(z)
    bad = np.abs(d) <= _DEGENERATE
    rnd = 0
    while bad.any():
        rnd += 1
        if rnd > _MAX_ROUNDS:
            raise RuntimeError("could not draw a nondegenerate Gaussian matrix")
        for b, col in zip(*np.nonzero(bad)):
            entries = np.arange(col, k * k, k, dtype=np.uint64)  # column ``col`` in row-major order
            z[b, :, col] = stream.complex_normals(samples[b : b + 1], component, entries, rnd)[0]
        redo = bad.any(axis=-1)
        q[redo], d[redo] = haar_from_ginibre(z[redo])
        bad = np.abs(d) <= _DEGENERATE
    return q


def sample_batch(k: int, n: int, stream: SeededStream, samples) -> np.ndarray:
    """Haar n-tuples for each sample index; shape (len(samples), n, k, k)."""
    if k < 1:
        raise ValueError("k must be positive")
    samples = np.atleast_1d(np.asarray(samples, dtype=np.uint64))
    out = np.empty((samples.size, n, k, k), dtype=complex)
    for g in range(n):
        out[:, g] = _haar_batch(k, stream, samples, g)
    return out


def sample_unitary(k: int, stream: SeededStream, index: int = 0) -> np.ndarray:
    """One Haar unitary: sample ``index`` of the stream, component 0."""
    return sample_batch(k, 1, stream, [index])[0, 0]


def sample_tuple(k: int, n: int, stream: SeededStream, index: int = 0) -> tuple[np.ndarray, ...]:
    """n independent Haar unitaries drawn from n distinct components of one sample."""
    if n == 0:
        return ()
    return tuple(sample_batch(k, n, stream, [index])[0])


def map_chunks(fn, samples: int, threads: int | None = None) -> list:
    """Apply ``fn(index_array)`` to fixed-size index chunks; results stay in index order."""
    chunks = [np.arange(a, min(a + CHUNK, samples), dtype=np.uint64) for a in range(0, samples, CHUNK)]
    nthreads = resolve_threads(threads)
    if nthreads == 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(fn, chunks))


@dataclass(frozen=True)
class InvarianceReport:
    degree: int
    samples: int
    max_discrepancy: float
    first_order: float   # max |mean f_ij(u) - mean f_ij(vu)|
    second_order: float  # max |mean f_ij conj(f_st)| discrepancy (0 when degree = 1)
    location: tuple


def _entry_moments(us: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray | None]:
    n, k, _ = us.shape
    first = us.mean(axis=0)
    if degree < 2:
        return first, None
    flat = us.reshape(n, k * k)
    second = flat.T @ flat.conj() / n  # second[(i,j),(s,t)] = mean f_ij conj(f_st)
    return first, second


def invariance_report(k: int, v: np.ndarray, degree: int, samples: int, seed: int,
                      threads: int | None = None) -> InvarianceReport:
    """Compare empirical entry moments of {u} and {v u} over the same Haar draws."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (k, k):
        raise DimensionMismatchError(f"v has shape {v.shape}, expected ({k}, {k})")
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    if not check_unitary(v):
        raise ValueError("v is not unitary")
    stream = SeededStream(seed)
    us = np.concatenate(map_chunks(lambda c: sample_batch(k, 1, stream, c)[:, 0], samples, threads))
    a1, a2 = _entry_moments(us, degree)
    b1, b2 = _entry_moments(v @ us, degree)
    d1 = np.abs(a1 - b1)
    i1 = np.unravel_index(int(np.argmax(d1)), d1.shape)
    first, loc = float(d1[i1]), ("f", int(i1[0]), int(i1[1]))
    second = 0.0
    if degree == 2:
        d2 = np.abs(a2 - b2)
        p, q = np.unravel_index(int(np.argmax(d2)), d2.shape)
        second = float(d2[p, q])
        if second > first:
            loc = ("f*conj(f)", int(p // k), int(p % k), int(q // k), int(q % k))
    return InvarianceReport(degree, samples, max(first, second), first, second, loc)
