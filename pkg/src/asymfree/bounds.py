"""Explicit constants and inequalities: Bell numbers, falling factorials,
injection sums, entry-moment bounds and the asymptotic-freeness bounds.

Bounds are computed exactly (ints and Fractions) and only converted to
float for reporting, so a comparison against an exact moment can never be
flipped by rounding.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceededError, HypothesisViolatedError

__all__ = [
    "BELL_CAP",
    "bell",
    "bell_triangle",
    "set_partitions",
    "falling_factorial",
    "InjectionInstance",
    "brute_injection_sum",
    "injection_sum_bound",
    "MomentBounds",
    "moment_integral_bounds",
    "BoundReport",
    "theorem_bounds",
    "corollary_intersection_bound",
]

BELL_CAP = 30


def bell_triangle(rows: int) -> list[list[int]]:
    """The first ``rows`` rows of the Bell (Aitken) triangle."""
    tri = [[1]]
    for _ in range(rows - 1):
        row = [tri[-1][-1]]
        for x in tri[-1]:
            row.append(row[-1] + x)
        tri.append(row)
    return tri


def bell(m: int) -> int:
    """Number of set partitions of an m-element set."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m > BELL_CAP:
        raise CapExceededError(f"bell({m}) is above the cap {BELL_CAP}")
    if m == 0:
        return 1
    return bell_triangle(m)[m - 1][-1]


def set_partitions(m: int, max_blocks: int | None = None) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length m: position i gets block label s[i].

    Each set partition of {0..m-1} appears exactly once; ``max_blocks``
    drops partitions with more blocks.
    """
    limit = m if max_blocks is None else max_blocks
    if m == 0:
        yield ()
        return
    s = [0] * m

    def rec(i, top):
        if i == m:
            yield tuple(s)
            return
        for b in range(min(top + 2, limit)):
            s[i] = b
            yield from rec(i + 1, max(top, b))

    yield from rec(1, 0)


def falling_factorial(k: int, d: int) -> int:
    """P(k, d) = k (k-1) ... (k-d+1), the number of injections of a d-set into a k-set."""
    if d < 0:
        raise ValueError("d must be nonnegative")
    if d > k:
        raise HypothesisViolatedError(f"P(k, d) needs d <= k, got d = {d}, k = {k}")
    return math.perm(k, d)


@dataclass(frozen=True, eq=False)
class InjectionInstance:
    """Functions on {1..k}: each F-function sums to zero, G-functions are free."""

    k: int
    f_funcs: tuple
    g_funcs: tuple = ()

    def __post_init__(self):
        fs = tuple(np.asarray(f, dtype=complex) for f in self.f_funcs)
        gs = tuple(np.asarray(g, dtype=complex) for g in self.g_funcs)
        for f in fs + gs:
            if f.shape != (self.k,):
                raise ValueError(f"every function needs {self.k} values, got shape {f.shape}")
        for f in fs:
            if abs(f.sum()) > 1e-12:
                raise HypothesisViolatedError(f"F-function sums to {f.sum()!r}, not 0")
        object.__setattr__(self, "f_funcs", fs)
        object.__setattr__(self, "g_funcs", gs)

    @property
    def n(self) -> int:
        return len(self.f_funcs)

    @property
    def m(self) -> int:
        return len(self.g_funcs)

    def norms(self) -> list[float]:
        return [float(np.max(np.abs(f))) for f in self.f_funcs + self.g_funcs]

    @classmethod
    def centered(cls, k: int, f_funcs, g_funcs=()) -> "InjectionInstance":
        """Subtract each F-function's mean so it sums to zero."""
        fs = [np.asarray(f, dtype=complex) - np.mean(f) for f in f_funcs]
        return cls(k, tuple(fs), tuple(g_funcs))


def brute_injection_sum(inst: InjectionInstance) -> complex:
    """Sum over all injections s of F u G into {1..k} of prod f_i(s(i)) prod g_j(s(j))."""
    size = inst.n + inst.m
    if size > 6 or inst.k > 9:
        raise CapExceededError(f"enumeration needs n+m <= 6 and k <= 9, got {size} and {inst.k}")
    funcs = np.array(inst.f_funcs + inst.g_funcs).reshape(size, inst.k)
    total = 0j
    for sigma in itertools.permutations(range(inst.k), size):
        term = 1 + 0j
        for row, a in enumerate(sigma):
            term *= funcs[row, a]
        total += term
    return total


def injection_sum_bound(n: int, m: int, k: int, norms: Sequence[float]) -> float:
    """k^(m + n/2) (n+m)^n prod norms, with (n+m)^0 = 1 when n = 0."""
    if len(norms) != n + m:
        raise ValueError(f"expected {n + m} norms, got {len(norms)}")
    return k ** (m + n / 2) * (n + m) ** n * math.prod(norms)


@dataclass(frozen=True)
class MomentBounds:
    lemma3: Fraction | None  # 1 / P(k, d)
    lemma5: Fraction | None  # 4^(m^2) / k^m


def moment_integral_bounds(m: int | None = None, d: int | None = None, k: int = 1) -> MomentBounds:
    """Exact entry-moment bounds: 1/P(k,d) (needs k >= d) and 4^(m^2)/k^m (needs k >= m)."""
    lemma3 = lemma5 = None
    if d is not None:
        if not 0 <= d <= k:
            raise HypothesisViolatedError(f"1/P(k, d) needs 0 <= d <= k, got d = {d}, k = {k}")
        lemma3 = Fraction(1, falling_factorial(k, d))
    if m is not None:
        if not 1 <= m <= k:
            raise HypothesisViolatedError(f"4^(m^2)/k^m needs 1 <= m <= k, got m = {m}, k = {k}")
        lemma5 = Fraction(4 ** (m * m), k**m)
    return MomentBounds(lemma3, lemma5)


def _to_float(x: Fraction) -> float:
    try:
        return float(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class BoundReport:
    m: int
    M: float
    w: int
    k: int
    eps: float | None
    mean_bound: float
    second_moment_bound: float
    tail_bound: float | None
    tail_valid: bool
    exact_mean_bound: Fraction
    exact_second_moment_bound: Fraction
    exact_tail_bound: Fraction | None

    def as_dict(self) -> dict:
        return {
            "m": self.m, "M": self.M, "w": self.w, "k": self.k, "eps": self.eps,
            "mean_bound": self.mean_bound, "second_bound": self.second_moment_bound,
            "tail_bound": self.tail_bound, "tail_valid": self.tail_valid,
        }


def _exact(x) -> Fraction:
    """Floats are read by their shortest decimal repr, so 0.1 means 1/10."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _constants(m: int, M, w: int) -> tuple[Fraction, Fraction]:
    M = _exact(M)
    a = bell(m) * 2 ** (m * m) * (M * w) ** w
    b = bell(2 * m) * 4 ** (m * m) * (2 * M * w) ** (2 * w)
    return a, b


def theorem_bounds(m: int, M: float, w: int, k: int, eps: float | None = None) -> BoundReport:
    """The mean, second-moment and tail bounds for an alternating product.

    With A = B(m) 2^(m^2) (Mw)^w and B = B(2m) 4^(m^2) (2Mw)^(2w):
    mean <= A/k, second moment <= B/k^2, and when k > 2A/eps the tail
    probability is at most 4B/(k^2 eps^2).  The tail bound is reported
    even when its hypothesis fails; ``tail_valid`` says whether it holds.
    """
    if m < 1 or w < 1 or k < 1:
        raise ValueError("m, w and k must be positive")
    if M <= 0:
        raise ValueError("M must be positive")
    a, b = _constants(m, M, w)
    mean = a / k
    second = b / (k * k)
    tail = None
    valid = False
    if eps is not None:
        if eps <= 0:
            raise ValueError("eps must be positive")
        e = _exact(eps)
        tail = 4 * b / (k * k * e * e)
        valid = k > 2 * a / e
    return BoundReport(
        m, float(M), w, k, None if eps is None else float(eps),
        _to_float(mean), _to_float(second), None if tail is None else _to_float(tail), valid,
        mean, second, tail,
    )


def corollary_intersection_bound(card_E: int, m: int, M: float, w: int, k: int, eps: float,
                                 exact: bool = False):
    """Lower bound 1 - card(E) 4 B(2m) 4^(m^2) (2Mw)^(2w) / (k^2 eps^2), clamped at 0.

    m, w and M act as uniform caps over every element of E.
    """
    if card_E < 0:
        raise ValueError("card_E must be nonnegative")
    if eps <= 0 or k < 1:
        raise ValueError("eps and k must be positive")
    _, b = _constants(m, M, w)
    e = _exact(eps)
    value = max(Fraction(0), 1 - card_E * 4 * b / (k * k * e * e))
    return value if exact else float(value)
