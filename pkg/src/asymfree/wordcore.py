"""Reduced words in the free group F_n and alternating word/observable products."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyWordError,
    GeneratorOutOfRangeError,
    LengthMismatchError,
)

__all__ = [
    "Letter",
    "ReducedWord",
    "AlternatingExpression",
    "reduce",
    "inverse",
    "evaluate",
    "validate_expression",
    "word",
]


class Letter(NamedTuple):
    """A generator h_g raised to +1 or -1 (generators are 1-based)."""

    generator: int
    exponent: int = 1

    def inverse(self) -> "Letter":
        return Letter(self.generator, -self.exponent)

    def __str__(self):
        return f"h{self.generator}" if self.exponent == 1 else f"h{self.generator}^-1"


def _check_letter(letter) -> Letter:
    g, e = letter
    if int(g) != g or g < 1:
        raise ValueError(f"generator index must be a positive integer, got {g!r}")
    if e not in (1, -1):
        raise ValueError(f"exponent must be +1 or -1, got {e!r}")
    return Letter(int(g), int(e))


@dataclass(frozen=True)
class ReducedWord:
    """A freely reduced word; the empty word is the identity e."""

    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        letters = tuple(_check_letter(x) for x in self.letters)
        for a, b in zip(letters, letters[1:]):
            if a.generator == b.generator and a.exponent != b.exponent:
                raise ValueError(f"word is not reduced: {a}{b} cancels")
        object.__setattr__(self, "letters", letters)

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __mul__(self, other: "ReducedWord") -> "ReducedWord":
        return reduce(self.letters + other.letters)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    @property
    def max_generator(self) -> int:
        return max((x.generator for x in self.letters), default=0)

    def inverse(self) -> "ReducedWord":
        return inverse(self)

    def __str__(self):
        return " ".join(str(x) for x in self.letters) if self.letters else "e"


def reduce(letters: Iterable) -> ReducedWord:
    """Freely reduce a letter sequence by cancelling adjacent inverse pairs."""
    stack: list[Letter] = []
    for x in letters:
        x = _check_letter(x)
        if stack and stack[-1].generator == x.generator and stack[-1].exponent == -x.exponent:
            stack.pop()
        else:
            stack.append(x)
    return ReducedWord(tuple(stack))


def word(*letters) -> ReducedWord:
    """Shorthand: ``word(1, -2)`` is h1 h2^-1 (sign gives the exponent)."""
    return reduce(Letter(abs(x), 1 if x > 0 else -1) for x in letters)


def inverse(w: ReducedWord) -> ReducedWord:
    return ReducedWord(tuple(x.inverse() for x in reversed(w.letters)))


def _dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def evaluate(w: ReducedWord, us: Sequence[np.ndarray]) -> np.ndarray:
    """Evaluate ``w`` at a tuple of unitaries, with h_g^-1 mapped to u_g*.

    The matrices may carry leading batch axes; all must share a shape.
    """
    us = [np.asarray(u) for u in us]
    if w.max_generator > len(us):
        raise GeneratorOutOfRangeError(
            f"word uses h{w.max_generator} but only {len(us)} matrices were given"
        )
    shapes = {u.shape for u in us}
    if len(shapes) > 1:
        raise DimensionMismatchError(f"matrices have differing shapes {sorted(shapes)}")
    if not us:
        raise DimensionMismatchError("cannot infer the dimension from an empty tuple")
    shape = us[0].shape
    if len(shape) < 2 or shape[-1] != shape[-2]:
        raise DimensionMismatchError(f"matrices must be square, got shape {shape}")
    out = np.broadcast_to(np.eye(shape[-1], dtype=complex), shape).copy()
    for x in w.letters:
        u = us[x.generator - 1]
        out = out @ (u if x.exponent == 1 else _dagger(u))
    return out


@dataclass(frozen=True)
class AlternatingExpression:
    """The product g_1 x_1 g_2 x_2 ... g_w x_w as (word, observable slot) pairs.

    Slots are 1-based references into an observable list supplied at
    evaluation time, so one expression serves every dimension k.
    """

    terms: tuple[tuple[ReducedWord, int], ...]

    def __post_init__(self):
        terms = tuple((w if isinstance(w, ReducedWord) else reduce(w), int(s)) for w, s in self.terms)
        if not terms:
            raise ValueError("an alternating expression needs at least one term")
        for w, s in terms:
            if s < 1:
                raise ValueError(f"observable slots are 1-based, got {s}")
        object.__setattr__(self, "terms", terms)

    @property
    def words(self) -> tuple[ReducedWord, ...]:
        return tuple(w for w, _ in self.terms)

    @property
    def slots(self) -> tuple[int, ...]:
        return tuple(s for _, s in self.terms)

    @property
    def w(self) -> int:
        return len(self.terms)

    @property
    def m(self) -> int:
        return sum(len(w) for w, _ in self.terms)

    @property
    def n(self) -> int:
        """Smallest number of generators the expression needs."""
        return max(w.max_generator for w, _ in self.terms)

    @property
    def cumulative_lengths(self) -> tuple[int, ...]:
        """m_1, ..., m_w: the position of the last letter of each word."""
        out, total = [], 0
        for w, _ in self.terms:
            total += len(w)
            out.append(total)
        return tuple(out)

    @property
    def letters(self) -> tuple[Letter, ...]:
        return tuple(x for w, _ in self.terms for x in w.letters)

    def __str__(self):
        return " ".join(f"{w} x{s}" for w, s in self.terms)


def validate_expression(expr: AlternatingExpression, n: int, declared_m: int | None = None) -> AlternatingExpression:
    """Check an alternating expression's hypotheses and return it.

    Words must be nontrivial, use only h_1..h_n, and have total length
    ``declared_m`` when that is given.
    """
    for i, (w, _) in enumerate(expr.terms, start=1):
        if w.is_identity:
            raise EmptyWordError(f"word g_{i} is the identity")
        if w.max_generator > n:
            raise GeneratorOutOfRangeError(f"word g_{i} uses h{w.max_generator} but n = {n}")
    if declared_m is not None and expr.m != declared_m:
        raise LengthMismatchError(f"total word length is {expr.m}, declared m = {declared_m}")
    return expr
