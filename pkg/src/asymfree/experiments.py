"""Monte Carlo estimates over Haar unitaries and free-product moment targets.

Every estimator draws sample i from the counter-based stream
(seed, 0, i) and reduces over the full per-sample array in index order,
so results do not depend on the thread count.
"""
from __future__ import annotations

import itertools
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .bounds import BoundReport, theorem_bounds
from .errors import (
    CapExceededError,
    DimensionMismatchError,
    ExpressionSyntaxError,
    MissingTargetError,
    NormExceededError,
    UnknownMomentError,
)
from .haarsample import SeededStream, map_chunks, sample_batch
from .matcore import DiagonalObservable, make_traceless_diagonal
from .wordcore import AlternatingExpression, validate_expression

__all__ = [
    "McEstimate",
    "FractionEstimate",
    "SweepRow",
    "trace_samples",
    "mc_trace_moment",
    "mc_tail_probability",
    "decay_sweep",
    "MLetter",
    "parse_monomial",
    "format_monomial",
    "free_moment",
    "diagonal_x_moments",
    "enumerate_monomials",
    "MicrostateSpec",
    "microstate_spec",
    "conjugation_spec",
    "microstate_fraction",
    "conjugation_freeness_fraction",
]

FREE_MOMENT_CAP = 6


@dataclass(frozen=True)
class McEstimate:
    mean: complex
    second_abs_moment: float
    std_error_mean: float
    std_error_second: float
    samples: int
    master_seed: int


@dataclass(frozen=True)
class FractionEstimate:
    """An empirical probability with its binomial standard error."""

    fraction: float
    std_error: float
    hits: int
    samples: int
    master_seed: int


@dataclass(frozen=True)
class SweepRow:
    k: int
    estimate: McEstimate
    bounds: BoundReport


def _check_observables(expr: AlternatingExpression, observables: Sequence[DiagonalObservable], k: int):
    slots = expr.slots
    if max(slots) > len(observables):
        raise IndexError(f"expression uses slot x{max(slots)} but only {len(observables)} observables given")
    for s in set(slots):
        x = observables[s - 1]
        if x.k != k:
            raise DimensionMismatchError(f"observable x{s} has dimension {x.k}, expected {k}")


def _dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _batch_traces(expr: AlternatingExpression, diags: list[np.ndarray], us: np.ndarray) -> np.ndarray:
    """tau_k(g_1 x_1 ... g_w x_w) for a stack of tuples ``us`` of shape (N, n, k, k)."""
    n_samples, n, k, _ = us.shape
    mats = [us[:, g] for g in range(n)]
    adj = [_dagger(u) for u in mats]
    prod = None
    for (w, _), d in zip(expr.terms, diags):
        for x in w.letters:
            f = mats[x.generator - 1] if x.exponent == 1 else adj[x.generator - 1]
            prod = f.copy() if prod is None else prod @ f
        prod *= d[None, None, :]
    return np.trace(prod, axis1=1, axis2=2) / k


def trace_samples(expr: AlternatingExpression, observables: Sequence[DiagonalObservable], k: int, n: int,
                  samples: int, seed: int, threads: int | None = None) -> np.ndarray:
    """Per-sample values of the normalized trace, in sample-index order."""
    validate_expression(expr, n)
    _check_observables(expr, observables, k)
    if samples < 1:
        raise ValueError("samples must be positive")
    diags = [observables[s - 1].diag for s in expr.slots]
    stream = SeededStream(seed)
    parts = map_chunks(lambda idx: _batch_traces(expr, diags, sample_batch(k, n, stream, idx)), samples, threads)
    return np.concatenate(parts)


def _estimate(values: np.ndarray, seed: int) -> McEstimate:
    n = values.size
    mean = complex(values.mean())
    sq = np.abs(values) ** 2
    second = float(sq.mean())
    if n > 1:
        se_mean = float(np.sqrt(np.sum(np.abs(values - mean) ** 2) / (n - 1) / n))
        se_second = float(np.std(sq, ddof=1) / np.sqrt(n))
    else:
        se_mean = se_second = float("nan")
    return McEstimate(mean, second, se_mean, se_second, n, seed)


def mc_trace_moment(expr: AlternatingExpression, observables: Sequence[DiagonalObservable], k: int, n: int,
                    samples: int, seed: int, threads: int | None = None) -> McEstimate:
    """Estimate the mean and mean square modulus of tau_k of the alternating product."""
    return _estimate(trace_samples(expr, observables, k, n, samples, seed, threads), seed)


def _fraction(hits: int, samples: int, seed: int) -> FractionEstimate:
    p = hits / samples
    return FractionEstimate(p, float(np.sqrt(p * (1 - p) / samples)), hits, samples, seed)


def mc_tail_probability(expr: AlternatingExpression, observables: Sequence[DiagonalObservable], k: int, n: int,
                        eps: float, samples: int, seed: int, threads: int | None = None) -> FractionEstimate:
    """Empirical probability that |tau_k(product)| >= eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    values = trace_samples(expr, observables, k, n, samples, seed, threads)
    return _fraction(int(np.count_nonzero(np.abs(values) >= eps)), samples, seed)


def decay_sweep(expr: AlternatingExpression, observables, ks: Sequence[int], samples: int, seed: int,
                n: int | None = None, eps: float | None = None, threads: int | None = None) -> list[SweepRow]:
    """One Monte Carlo estimate plus the matching bounds per dimension k.

    ``observables`` is either a callable k -> list of observables or a
    pattern name understood by :func:`make_traceless_diagonal` (M = 1).
    """
    n = expr.n if n is None else n
    if isinstance(observables, str):
        pattern = observables
        observables = lambda k: [make_traceless_diagonal(k, pattern)] * max(expr.slots)  # noqa: E731
    rows = []
    for k in ks:
        obs = observables(k)
        est = mc_trace_moment(expr, obs, k, n, samples, seed, threads)
        M = max(obs[s - 1].M for s in set(expr.slots))
        rows.append(SweepRow(k, est, theorem_bounds(expr.m, M, expr.w, k, eps)))
    return rows


# --- free-product moments ------------------------------------------------

class MLetter(NamedTuple):
    """One letter of a *-monomial: ``kind`` is "x" (observable) or "u" (unitary)."""

    kind: str
    index: int
    star: bool = False

    def adjoint(self) -> "MLetter":
        return MLetter(self.kind, self.index, not self.star)

    def __str__(self):
        return f"{self.kind}{self.index}{'*' if self.star else ''}"


_MTOKEN = re.compile(r"([xu])([1-9][0-9]*)(\*?)$")


def parse_monomial(text: str) -> tuple[MLetter, ...]:
    """Parse whitespace-separated letters such as ``"u1 x1 u1* x1"``."""
    out, pos = [], 0
    for tok in text.split():
        pos = text.index(tok, pos)
        match = _MTOKEN.match(tok)
        if not match:
            raise ExpressionSyntaxError(f"bad monomial letter {tok!r}", pos)
        out.append(MLetter(match.group(1), int(match.group(2)), bool(match.group(3))))
        pos += len(tok)
    return tuple(out)


def format_monomial(mono: Sequence[MLetter]) -> str:
    return " ".join(str(x) for x in mono)


def _x_key(counts: Counter) -> tuple:
    """Canonical key ((j, a, b), ...) for prod_j X_j^a (X_j*)^b."""
    idx = sorted({j for j, _ in counts})
    return tuple((j, counts[(j, False)], counts[(j, True)]) for j in idx if counts[(j, False)] + counts[(j, True)])


def _blocks(mono: Sequence[MLetter]) -> list:
    blocks = []
    for x in mono:
        if x.kind == "x":
            blocks.append(("x", Counter({(x.index, x.star): 1})))
        elif x.kind == "u":
            blocks.append((("u", x.index), -1 if x.star else 1))
        else:
            raise ValueError(f"unknown letter kind {x.kind!r}")
    return blocks


def _merge(a, b):
    if a[0] == "x":
        return ("x", a[1] + b[1])
    return (a[0], a[1] + b[1])


def _normalize(blocks: list) -> tuple:
    """Merge neighbours from the same algebra (cyclically) and drop identity blocks."""
    blocks = list(blocks)
    changed = True
    while changed:
        changed = False
        out = []
        for b in blocks:
            if out and out[-1][0] == b[0]:
                out[-1] = _merge(out[-1], b)
                changed = True
            else:
                out.append(b)
        if len(out) > 1 and out[0][0] == out[-1][0]:
            out[0] = _merge(out[-1], out[0])
            out.pop()
            changed = True
        blocks = [b for b in out if not (b[0] != "x" and b[1] == 0)]
        changed = changed or len(blocks) != len(out)
    return tuple((b[0], _x_key(b[1])) if b[0] == "x" else b for b in blocks)


def diagonal_x_moments(diags: Sequence) -> Callable[[tuple], complex]:
    """Joint moments tau(prod_j x_j^a (x_j*)^b) of commuting diagonal matrices."""
    arrays = [np.asarray(d.diag if isinstance(d, DiagonalObservable) else d, dtype=complex) for d in diags]

    def moment(key: tuple) -> complex:
        vals = np.ones_like(arrays[0])
        for j, a, b in key:
            if not 1 <= j <= len(arrays):
                raise UnknownMomentError(f"no observable x{j}")
            g = arrays[j - 1]
            vals = vals * g**a * np.conj(g) ** b
        return complex(vals.mean())

    return moment


def free_moment(monomial: Sequence[MLetter] | str, x_moments, cap: int = FREE_MOMENT_CAP):
    """tau of a *-monomial in the free product of the commuting x-family and free Haar unitaries.

    ``x_moments`` maps a key ((j, a, b), ...) for prod_j X_j^a (X_j*)^b to
    its trace; it may be a Mapping or a callable.  Each U_i satisfies
    tau(U_i^p) = 0 for p != 0.  The value comes from centering: with every
    block replaced by b - tau(b), an alternating product has trace 0, so
      tau(b_1...b_L) = -sum_{S nonempty} prod_{j in S} (-tau(b_j)) tau(prod_{j not in S} b_j),
    and each term on the right has fewer blocks.
    """
    if isinstance(monomial, str):
        monomial = parse_monomial(monomial)
    if len(monomial) > cap:
        raise CapExceededError(f"monomial degree {len(monomial)} exceeds cap {cap}")

    def lookup(key):
        try:
            return x_moments(key) if callable(x_moments) else x_moments[key]
        except KeyError:
            raise UnknownMomentError(f"x-moment {key} not supplied") from None

    def block_trace(b):
        if b[0] == "x":
            return lookup(b[1])
        return 1 if b[1] == 0 else 0

    cache: dict = {}

    def trace(blocks: tuple):
        if not blocks:
            return 1
        if len(blocks) == 1:
            return block_trace(blocks[0])
        if blocks in cache:
            return cache[blocks]
        taus = [block_trace(b) for b in blocks]
        total = 0
        L = len(blocks)
        for size in range(1, L + 1):
            for S in itertools.combinations(range(L), size):
                coeff = 1
                for j in S:
                    coeff = coeff * (-taus[j])
                if coeff == 0:
                    continue
                rest = _normalize([_denormal(blocks[j]) for j in range(L) if j not in S])
                total = total + coeff * trace(rest)
        cache[blocks] = -total
        return -total

    return trace(_normalize(_blocks(monomial)))


def _denormal(b):
    if b[0] == "x":
        return ("x", Counter({(j, s): c for j, a, bb in b[1] for s, c in ((False, a), (True, bb)) if c}))
    return b


def _canonical_rotation(word: tuple) -> tuple:
    return min(word[i:] + word[:i] for i in range(len(word)))


def enumerate_monomials(alphabet: Sequence[tuple[str, int]], m: int) -> list[tuple[MLetter, ...]]:
    """Every *-word of degree 1..m, one representative per cyclic rotation class."""
    letters = [MLetter(kind, i, star) for kind, i in alphabet for star in (False, True)]
    seen = set()
    for q in range(1, m + 1):
        for word in itertools.product(letters, repeat=q):
            seen.add(_canonical_rotation(word))
    return sorted(seen, key=lambda w: (len(w), w))


@dataclass(frozen=True)
class MicrostateSpec:
    """Tolerances and targets for membership in a microstate set."""

    R: float
    m: int
    eps: float
    targets: Mapping = field(repr=False)

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        for mono in self.targets:
            if len(mono) > self.m:
                raise ValueError(f"target monomial {format_monomial(mono)} has degree above m = {self.m}")


def _diag_arrays(xs) -> list[np.ndarray]:
    return [np.asarray(x.diag if isinstance(x, DiagonalObservable) else x, dtype=complex) for x in xs]


def microstate_spec(xs, n: int, m: int, eps: float, R: float | None = None,
                    x_moments=None) -> MicrostateSpec:
    """Targets from free Haar unitaries u_1..u_n free from the commuting family xs.

    The family's own moments default to those of the supplied diagonal
    matrices; R defaults to max(1, max ||x_j||).
    """
    diags = _diag_arrays(xs)
    if R is None:
        R = max([1.0] + [float(np.max(np.abs(d))) for d in diags])
    x_moments = x_moments or diagonal_x_moments(diags)
    alphabet = [("x", j) for j in range(1, len(diags) + 1)] + [("u", i) for i in range(1, n + 1)]
    targets = {mono: complex(free_moment(mono, x_moments)) for mono in enumerate_monomials(alphabet, m)}
    return MicrostateSpec(R, m, eps, targets)


def _sandwich(mono: Sequence[MLetter]) -> tuple[MLetter, ...]:
    out = []
    for x in mono:
        out += [MLetter("u", x.index, True), MLetter("x", x.index, x.star), MLetter("u", x.index, False)]
    return tuple(out)


def conjugation_spec(xs, m: int, eps: float, R: float | None = None, x_moments=None) -> MicrostateSpec:
    """Targets for free copies X_j of the x_j: X_j is encoded as U_j* x_j U_j."""
    diags = _diag_arrays(xs)
    if R is None:
        R = max([1.0] + [float(np.max(np.abs(d))) for d in diags])
    x_moments = x_moments or diagonal_x_moments(diags)
    alphabet = [("x", j) for j in range(1, len(diags) + 1)]
    targets = {
        mono: complex(free_moment(_sandwich(mono), x_moments, cap=3 * m))
        for mono in enumerate_monomials(alphabet, m)
    }
    return MicrostateSpec(R, m, eps, targets)


def _monomial_traces(mono, diags, unitaries, k, n_samples: int) -> np.ndarray:
    """tau_k of a monomial for a batch; diags are vectors, unitaries stacks (N, k, k)."""
    prod = np.broadcast_to(np.eye(k, dtype=complex), (n_samples, k, k)).copy()
    for x in mono:
        if x.kind == "x":
            d = diags[x.index - 1]
            prod *= (np.conj(d) if x.star else d)[None, None, :]
        else:
            u = unitaries[x.index - 1]
            prod = prod @ (_dagger(u) if x.star else u)
    return np.trace(prod, axis1=1, axis2=2) / k


def _membership(spec: MicrostateSpec, monos, diags, unitaries, k, n_samples: int) -> np.ndarray:
    ok = np.ones(n_samples, dtype=bool)
    for mono in monos:
        vals = _monomial_traces(mono, diags, unitaries, k, n_samples)
        ok &= np.abs(vals - spec.targets[mono]) < spec.eps
    return ok


def _check_targets(spec: MicrostateSpec, monos):
    missing = [format_monomial(w) for w in monos if w not in spec.targets]
    if missing:
        raise MissingTargetError(f"no target for {missing[:3]}{'...' if len(missing) > 3 else ''}")


def _check_norms(diags, R: float, k: int):
    for j, d in enumerate(diags, start=1):
        if d.shape != (k,):
            raise DimensionMismatchError(f"x{j} has {d.shape[0]} diagonal entries, expected {k}")
        if np.max(np.abs(d)) > R * (1 + 1e-12):
            raise NormExceededError(f"||x{j}|| = {np.max(np.abs(d))} exceeds R = {R}")


def microstate_fraction(k: int, n: int, s: int, spec: MicrostateSpec, xs, samples: int, seed: int,
                        threads: int | None = None) -> FractionEstimate:
    """Fraction of Haar n-tuples v for which (x_1..x_s, v_1..v_n) lies in the microstate set."""
    diags = _diag_arrays(xs)
    if len(diags) != s:
        raise ValueError(f"expected {s} fixed matrices, got {len(diags)}")
    _check_norms(diags, spec.R, k)
    alphabet = [("x", j) for j in range(1, s + 1)] + [("u", i) for i in range(1, n + 1)]
    monos = enumerate_monomials(alphabet, spec.m)
    _check_targets(spec, monos)
    stream = SeededStream(seed)

    def chunk(idx):
        us = sample_batch(k, n, stream, idx)
        if n and spec.R < 1:
            return np.zeros(idx.size, dtype=bool)  # unitaries have norm 1 > R
        return _membership(spec, monos, diags, [us[:, i] for i in range(n)], k, idx.size)

    ok = np.concatenate(map_chunks(chunk, samples, threads))
    return _fraction(int(ok.sum()), samples, seed)


def conjugation_freeness_fraction(k: int, s: int, spec: MicrostateSpec, xs, samples: int, seed: int,
                                  threads: int | None = None) -> FractionEstimate:
    """Fraction of Haar s-tuples v with (v_1* x_1 v_1, ..., v_s* x_s v_s) in the microstate set."""
    diags = _diag_arrays(xs)
    if len(diags) != s:
        raise ValueError(f"expected {s} fixed matrices, got {len(diags)}")
    _check_norms(diags, spec.R, k)
    monos = enumerate_monomials([("x", j) for j in range(1, s + 1)], spec.m)
    _check_targets(spec, monos)
    stream = SeededStream(seed)

    def chunk(idx):
        vs = sample_batch(k, s, stream, idx)
        ys = {}
        for j in range(s):
            adj = _dagger(vs[:, j])
            ys[(j + 1, False)] = (adj * diags[j][None, None, :]) @ vs[:, j]
            ys[(j + 1, True)] = (adj * np.conj(diags[j])[None, None, :]) @ vs[:, j]
        ok = np.ones(idx.size, dtype=bool)
        for mono in monos:
            prod = ys[(mono[0].index, mono[0].star)]
            for x in mono[1:]:
                prod = prod @ ys[(x.index, x.star)]
            vals = np.trace(prod, axis1=1, axis2=2) / k
            ok &= np.abs(vals - spec.targets[mono]) < spec.eps
        return ok

    ok = np.concatenate(map_chunks(chunk, samples, threads))
    return _fraction(int(ok.sum()), samples, seed)
