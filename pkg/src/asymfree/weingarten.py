"""Exact Haar-unitary entry moments via the Weingarten function.

All arithmetic is over Fractions (and cyclotomic numbers for observables
with irrational entries).  Wg(., k) is obtained by inverting the Gram
matrix G[s, t] = k^cycles(s t^-1) restricted to class functions: because
G commutes with conjugation, its inverse row at the identity is a class
function, so one p(m) x p(m) integer system replaces the m! x m! one.
"""
from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import prod
from typing import Sequence

from .errors import CapExceededError, DimensionTooSmallError, GeneratorOutOfRangeError
from .exactnum import Cyclotomic
from .matcore import DiagonalObservable
from .wordcore import AlternatingExpression, validate_expression

__all__ = [
    "DEFAULT_ORDER_CAP",
    "MAX_ORDER_CAP",
    "MAX_INDEX_MAPS",
    "Permutation",
    "compose",
    "perm_inverse",
    "cycle_count",
    "cycle_type",
    "WeingartenTable",
    "weingarten_table",
    "solve_fraction_free",
    "EntryMomentSpec",
    "entry_moment_vanishes",
    "weingarten_sum",
    "exact_entry_moment",
    "exact_word_moment",
    "exact_second_moment",
]

DEFAULT_ORDER_CAP = 5
MAX_ORDER_CAP = 6
MAX_INDEX_MAPS = 10**7

Permutation = tuple  # images of 0..m-1


def compose(p: Permutation, q: Permutation) -> Permutation:
    """(p o q)(i) = p(q(i))."""
    return tuple(p[i] for i in q)


def perm_inverse(p: Permutation) -> Permutation:
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


def cycle_type(p: Permutation) -> tuple[int, ...]:
    seen = [False] * len(p)
    lengths = []
    for start in range(len(p)):
        if not seen[start]:
            n, i = 0, start
            while not seen[i]:
                seen[i] = True
                i = p[i]
                n += 1
            lengths.append(n)
    return tuple(sorted(lengths, reverse=True))


def cycle_count(p: Permutation) -> int:
    return len(cycle_type(p))


def solve_fraction_free(a: Sequence[Sequence[int]], b: Sequence[int]) -> list[Fraction]:
    """Solve a nonsingular integer system exactly by Bareiss elimination."""
    n = len(a)
    rows = [list(map(int, r)) + [int(v)] for r, v in zip(a, b)]
    prev = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if rows[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        rows[c], rows[piv] = rows[piv], rows[c]
        for r in range(c + 1, n):
            for j in range(c + 1, n + 1):
                rows[r][j] = (rows[c][c] * rows[r][j] - rows[r][c] * rows[c][j]) // prev
            rows[r][c] = 0
        prev = rows[c][c]
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        s = Fraction(rows[r][n]) - sum(rows[r][j] * x[j] for j in range(r + 1, n))
        x[r] = s / rows[r][r]
    return x


@lru_cache(maxsize=None)
def _perms_by_class(m: int) -> dict[tuple[int, ...], list[Permutation]]:
    classes: dict[tuple[int, ...], list[Permutation]] = defaultdict(list)
    for p in itertools.permutations(range(m)):
        classes[cycle_type(p)].append(p)
    return dict(sorted(classes.items(), reverse=True))


@dataclass(frozen=True)
class WeingartenTable:
    """Wg(., k) on S_m, stored once per cycle type."""

    m: int
    k: int
    by_cycle_type: dict

    def __getitem__(self, p: Permutation) -> Fraction:
        if len(p) != self.m:
            raise ValueError(f"expected a permutation of {self.m} points")
        return self.by_cycle_type[cycle_type(p)]

    def expand(self) -> dict[Permutation, Fraction]:
        return {p: self.by_cycle_type[ct] for ct, ps in _perms_by_class(self.m).items() for p in ps}


@lru_cache(maxsize=None)
def _table(m: int, k: int) -> WeingartenTable:
    classes = _perms_by_class(m)
    reps = [ps[0] for ps in classes.values()]
    # Row for representative r: sum_{p in class c} k^cycles(p r^-1); right side is delta_{r = e}.
    a = []
    for r in reps:
        r_inv = perm_inverse(r)
        a.append([sum(k ** cycle_count(compose(p, r_inv)) for p in ps) for ps in classes.values()])
    identity_type = (1,) * m
    rhs = [1 if cycle_type(r) == identity_type else 0 for r in reps]
    values = solve_fraction_free(a, rhs)
    return WeingartenTable(m, k, dict(zip(classes, values)))


def weingarten_table(m: int, k: int, cap: int = DEFAULT_ORDER_CAP) -> WeingartenTable:
    """Exact Wg(pi, k) for pi in S_m; requires k >= m."""
    if m < 1:
        raise ValueError("order m must be positive")
    if cap > MAX_ORDER_CAP:
        raise CapExceededError(f"order cap {cap} exceeds the maximum {MAX_ORDER_CAP}")
    if m > cap:
        raise CapExceededError(f"order {m} exceeds the configured cap {cap}")
    if k < m:
        raise DimensionTooSmallError(f"Weingarten table needs k >= m, got k = {k}, m = {m}")
    return _table(m, k)


@dataclass(frozen=True)
class EntryMomentSpec:
    """Index data for the integral of prod f_{ij}(u_g) * prod conj(f_{st}(u_g)).

    ``plain`` and ``conj`` hold (row, col, generator) triples, all 1-based.
    """

    plain: tuple[tuple[int, int, int], ...]
    conj: tuple[tuple[int, int, int], ...]
    k: int

    def __post_init__(self):
        plain = tuple(_triple(t) for t in self.plain)
        conj = tuple(_triple(t) for t in self.conj)
        for i, j, g in plain + conj:
            if not (1 <= i <= self.k and 1 <= j <= self.k):
                raise ValueError(f"index ({i}, {j}) outside 1..{self.k}")
            if g < 1:
                raise GeneratorOutOfRangeError(f"generator index {g} must be >= 1")
        object.__setattr__(self, "plain", plain)
        object.__setattr__(self, "conj", conj)

    @classmethod
    def single(cls, plain, conj, k: int) -> "EntryMomentSpec":
        """All factors on one generator; factors given as (row, col) pairs."""
        return cls(tuple((i, j, 1) for i, j in plain), tuple((s, t, 1) for s, t in conj), k)

    @property
    def generators(self) -> list[int]:
        return sorted({g for _, _, g in self.plain + self.conj})

    def split(self, g: int) -> tuple[tuple, tuple, tuple, tuple]:
        """(rows, cols, conj rows, conj cols) of the factors on generator g."""
        p = [(i, j) for i, j, h in self.plain if h == g]
        c = [(s, t) for s, t, h in self.conj if h == g]
        return (tuple(i for i, _ in p), tuple(j for _, j in p), tuple(s for s, _ in c), tuple(t for _, t in c))

    @property
    def degree(self) -> int:
        return len(self.plain) + len(self.conj)


def _triple(t) -> tuple[int, int, int]:
    if len(t) == 2:
        return int(t[0]), int(t[1]), 1
    i, j, g = t
    return int(i), int(j), int(g)


def _forced_zero(rows, cols, crows, ccols) -> bool:
    return len(rows) != len(crows) or Counter(rows) != Counter(crows) or Counter(cols) != Counter(ccols)


def entry_moment_vanishes(spec: EntryMomentSpec) -> bool:
    """True when factor counts, row multisets or column multisets differ for some generator."""
    return any(_forced_zero(*spec.split(g)) for g in spec.generators)


def _matchings(src: tuple, dst: tuple):
    """Permutations p with src[a] == dst[p[a]] for every a."""
    m = len(src)
    used = [False] * m
    perm = [0] * m

    def rec(a):
        if a == m:
            yield tuple(perm)
            return
        for b in range(m):
            if not used[b] and dst[b] == src[a]:
                used[b] = True
                perm[a] = b
                yield from rec(a + 1)
                used[b] = False

    yield from rec(0)


@lru_cache(maxsize=200_000)
def weingarten_sum(rows: tuple, cols: tuple, crows: tuple, ccols: tuple, k: int,
                   cap: int = DEFAULT_ORDER_CAP) -> Fraction:
    """The Weingarten formula for one Haar unitary, with no shortcut.

    E[prod_a u_{rows[a], cols[a]} prod_b conj(u_{crows[b], ccols[b]})]
      = sum over s, t with rows = crows o s, cols = ccols o t of Wg(t s^-1, k).
    Unequal factor counts give 0 (phase invariance u -> e^{i theta} u).
    """
    m = len(rows)
    if m != len(crows):
        return Fraction(0)
    if m == 0:
        return Fraction(1)
    sigmas = list(_matchings(rows, crows))
    if not sigmas:
        return Fraction(0)
    taus = list(_matchings(cols, ccols))
    if not taus:
        return Fraction(0)
    table = weingarten_table(m, k, cap)
    total = Fraction(0)
    for s in sigmas:
        s_inv = perm_inverse(s)
        for t in taus:
            total += table[compose(t, s_inv)]
    return total


def exact_entry_moment(spec: EntryMomentSpec, cap: int = DEFAULT_ORDER_CAP) -> Fraction:
    """Exact value of the entry-moment integral over independent Haar unitaries.

    Factorizes over generators; returns 0 without further work whenever
    :func:`entry_moment_vanishes` holds.
    """
    parts = [spec.split(g) for g in spec.generators]
    if any(_forced_zero(*p) for p in parts):
        return Fraction(0)
    return prod((weingarten_sum(*p, spec.k, cap) for p in parts), start=Fraction(1))


# --- alternating products -------------------------------------------------

def _relabel(seq: tuple) -> tuple:
    seen: dict = {}
    return tuple(seen.setdefault(x, len(seen)) for x in seq)


@lru_cache(maxsize=500_000)
def _canonical_generator_moment(rows, cols, crows, ccols, k, cap):
    return weingarten_sum(rows, cols, crows, ccols, k, cap)


def _generator_moment(rows, cols, crows, ccols, k, cap) -> Fraction:
    # Row labels and column labels may be renamed independently (left/right invariance).
    r = _relabel(rows + crows)
    c = _relabel(cols + ccols)
    m = len(rows)
    return _canonical_generator_moment(r[:m], c[:m], r[m:], c[m:], k, cap)


def _templates(expr: AlternatingExpression, offset: int, conjugate: bool):
    """Factor templates (generator, is_plain, row position, col position) for tau_k of expr.

    Positions index the cyclic index map alpha; ``conjugate`` builds the
    complex conjugate of the trace on positions offset..offset+m-1.
    """
    letters = expr.letters
    m = len(letters)
    out = []
    for j, x in enumerate(letters):
        here, nxt = offset + j, offset + (j + 1) % m
        if x.exponent == 1:  # f_{a b}(u)
            out.append((x.generator, not conjugate, here, nxt))
        else:  # f_{a b}(u*) = conj(f_{b a}(u))
            out.append((x.generator, conjugate, nxt, here))
    weight_positions = [offset + mv % m for mv in expr.cumulative_lengths]
    return out, weight_positions


def _order_check(templates, k: int, cap: int) -> bool:
    """Return False when some generator's factor counts differ (the integral is 0).

    The order cap is enforced first so that oversized inputs fail the same
    way whether or not they happen to vanish.
    """
    counts: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    for g, plain, _, _ in templates:
        counts[g][0 if plain else 1] += 1
    for g, (p, c) in counts.items():
        if max(p, c) > cap:
            raise CapExceededError(f"generator h{g} carries {max(p, c)} factors, above cap {cap}")
    for g, (p, c) in counts.items():
        if p != c:
            return False
        if k < p:
            raise DimensionTooSmallError(f"generator h{g} needs k >= {p}, got k = {k}")
    return True


def _expand(templates, positions: int, weight_slots, k: int, cap: int, max_maps: int):
    """Sum the integral over all index maps, grouped by the observable indices they pick."""
    if k**positions > max_maps:
        raise CapExceededError(f"{k}^{positions} index maps exceed the cap {max_maps}")
    gens = sorted({t[0] for t in templates})
    by_gen = [[t for t in templates if t[0] == g] for g in gens]
    grouped: dict[tuple, Fraction] = defaultdict(Fraction)
    for alpha in itertools.product(range(k), repeat=positions):
        value = Fraction(1)
        for ts in by_gen:
            rows = tuple(alpha[t[2]] for t in ts if t[1])
            crows = tuple(alpha[t[2]] for t in ts if not t[1])
            if Counter(rows) != Counter(crows):
                value = 0
                break
            cols = tuple(alpha[t[3]] for t in ts if t[1])
            ccols = tuple(alpha[t[3]] for t in ts if not t[1])
            if Counter(cols) != Counter(ccols):
                value = 0
                break
            value *= _generator_moment(rows, cols, crows, ccols, k, cap)
            if not value:
                break
        if value:
            grouped[tuple(alpha[p] for p in weight_slots)] += value
    return grouped


def _observable_entries(expr, observables, k):
    slots = expr.slots
    if max(slots) > len(observables):
        raise IndexError(f"expression uses slot x{max(slots)} but only {len(observables)} observables given")
    entries = []
    for s in slots:
        obs = observables[s - 1]
        if not isinstance(obs, DiagonalObservable):
            raise TypeError("observables must be DiagonalObservable instances")
        if obs.k != k:
            raise ValueError(f"observable x{s} has dimension {obs.k}, expected {k}")
        entries.append(obs.exact_entries())
    return entries


def exact_word_moment(expr: AlternatingExpression, observables: Sequence[DiagonalObservable], k: int,
                      n: int | None = None, cap: int = DEFAULT_ORDER_CAP,
                      max_maps: int = MAX_INDEX_MAPS) -> Cyclotomic:
    """Exact E[tau_k(g_1(u) x_1 ... g_w(u) x_w)] over Haar n-tuples.

    Expands the trace over every cyclic index map alpha: {1..m} -> {1..k},
    weights each map by the observable entries it selects, and sums exact
    entry moments.  Only the per-generator factor count must not exceed k.
    """
    validate_expression(expr, n if n is not None else expr.n)
    entries = _observable_entries(expr, observables, k)
    templates, weights = _templates(expr, 0, conjugate=False)
    if not _order_check(templates, k, cap):
        return Cyclotomic.rational(0)
    grouped = _expand(templates, expr.m, weights, k, cap, max_maps)
    total = Cyclotomic.rational(0)
    for picks, coeff in grouped.items():
        term = Cyclotomic.rational(coeff)
        for nu, a in enumerate(picks):
            term = term * entries[nu][a]
        total = total + term
    return total / k


def exact_second_moment(expr: AlternatingExpression, observables: Sequence[DiagonalObservable], k: int,
                        n: int | None = None, cap: int = DEFAULT_ORDER_CAP,
                        max_maps: int = MAX_INDEX_MAPS) -> Cyclotomic:
    """Exact E|tau_k(g_1(u) x_1 ... g_w(u) x_w)|^2 over Haar n-tuples."""
    validate_expression(expr, n if n is not None else expr.n)
    entries = _observable_entries(expr, observables, k)
    m = expr.m
    t1, w1 = _templates(expr, 0, conjugate=False)
    t2, w2 = _templates(expr, m, conjugate=True)
    templates = t1 + t2
    if not _order_check(templates, k, cap):
        return Cyclotomic.rational(0)
    grouped = _expand(templates, 2 * m, w1 + w2, k, cap, max_maps)
    conj_entries = [tuple(e.conjugate() for e in row) for row in entries]
    w = expr.w
    total = Cyclotomic.rational(0)
    for picks, coeff in grouped.items():
        term = Cyclotomic.rational(coeff)
        for nu, a in enumerate(picks[:w]):
            term = term * entries[nu][a]
        for nu, a in enumerate(picks[w:]):
            term = term * conj_entries[nu][a]
        total = total + term
    return total / (k * k)
