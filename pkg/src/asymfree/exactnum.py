"""Exact numbers in cyclotomic fields Q(zeta_N).

Observables built from roots of unity have entries outside Q(i), so exact
moments are kept as elements of the smallest cyclotomic field that holds
them.  Elements are stored in the power basis 1, z, ..., z^(phi(N)-1)
reduced modulo the N-th cyclotomic polynomial, which makes the
representation canonical for a fixed conductor.
"""
from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Mapping

import mpmath

__all__ = ["Cyclotomic", "cyclotomic_polynomial", "exact_from_complex", "abs_le"]


def _poly_divmod(num: list, den: list) -> tuple[list, list]:
    """Divide integer/rational polynomials (lowest degree first) by a monic divisor."""
    num = list(num)
    q = [0] * max(len(num) - len(den) + 1, 1)
    lead = den[-1]
    for shift in range(len(num) - len(den), -1, -1):
        c = num[shift + len(den) - 1]
        if c:
            c = c / lead if lead != 1 else c
            q[shift] = c
            for i, d in enumerate(den):
                num[shift + i] -= c * d
    return q, num[: len(den) - 1]


@lru_cache(maxsize=None)
def cyclotomic_polynomial(n: int) -> tuple[int, ...]:
    """Integer coefficients of Phi_n, lowest degree first."""
    if n < 1:
        raise ValueError("cyclotomic polynomial needs n >= 1")
    poly = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            poly, rem = _poly_divmod(poly, list(cyclotomic_polynomial(d)))
            assert not any(rem)
    return tuple(int(c) for c in poly)


def _reduce(coeffs: list, n: int) -> tuple[Fraction, ...]:
    phi = cyclotomic_polynomial(n)
    deg = len(phi) - 1
    if len(coeffs) > deg:
        _, rem = _poly_divmod(coeffs, list(phi))
    else:
        rem = list(coeffs) + [0] * (deg - len(coeffs))
    return tuple(Fraction(c) for c in rem)


class Cyclotomic:
    """An exact element of Q(zeta_N) with zeta_N = exp(2 pi i / N)."""

    __slots__ = ("conductor", "coeffs")

    def __init__(self, conductor: int, coeffs: Iterable):
        self.conductor = int(conductor)
        self.coeffs = _reduce(list(coeffs), self.conductor)

    # construction ---------------------------------------------------------
    @classmethod
    def rational(cls, value) -> "Cyclotomic":
        return cls(1, [Fraction(value)])

    @classmethod
    def root_of_unity(cls, n: int, power: int = 1, scale=1) -> "Cyclotomic":
        """``scale * exp(2 pi i power / n)``."""
        coeffs = [Fraction(0)] * n
        coeffs[power % n] = Fraction(scale)
        return cls(n, coeffs)

    @classmethod
    def from_exponents(cls, n: int, terms: Mapping[int, object]) -> "Cyclotomic":
        coeffs = [Fraction(0)] * n
        for e, c in terms.items():
            coeffs[e % n] += Fraction(c)
        return cls(n, coeffs)

    @classmethod
    def gaussian(cls, re, im) -> "Cyclotomic":
        return cls(4, [Fraction(re), Fraction(im)])

    # field operations -----------------------------------------------------
    def lift(self, conductor: int) -> "Cyclotomic":
        if conductor == self.conductor:
            return self
        if conductor % self.conductor:
            raise ValueError(f"Q(zeta_{self.conductor}) does not embed in Q(zeta_{conductor})")
        step = conductor // self.conductor
        coeffs = [Fraction(0)] * (step * len(self.coeffs))
        for i, c in enumerate(self.coeffs):
            coeffs[i * step] = c
        return Cyclotomic(conductor, coeffs)

    def _common(self, other) -> tuple["Cyclotomic", "Cyclotomic"]:
        other = _coerce(other)
        n = math.lcm(self.conductor, other.conductor)
        return self.lift(n), other.lift(n)

    def __add__(self, other):
        a, b = self._common(other)
        return Cyclotomic(a.conductor, [x + y for x, y in zip(a.coeffs, b.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return Cyclotomic(self.conductor, [-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Rational)):
            return Cyclotomic(self.conductor, [c * other for c in self.coeffs])
        a, b = self._common(other)
        prod = [Fraction(0)] * (len(a.coeffs) + len(b.coeffs) - 1)
        for i, x in enumerate(a.coeffs):
            if x:
                for j, y in enumerate(b.coeffs):
                    if y:
                        prod[i + j] += x * y
        return Cyclotomic(a.conductor, prod)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Rational)):
            return Cyclotomic(self.conductor, [c / other for c in self.coeffs])
        other = _coerce(other)
        r = other.as_fraction()
        if r is None:
            raise TypeError("division only by rational values")
        return self / r

    def __pow__(self, p: int):
        if p < 0:
            raise ValueError("negative powers are not supported")
        out = Cyclotomic.rational(1)
        base = self
        while p:
            if p & 1:
                out = out * base
            base = base * base
            p >>= 1
        return out

    def conjugate(self) -> "Cyclotomic":
        n = self.conductor
        coeffs = [Fraction(0)] * n
        for i, c in enumerate(self.coeffs):
            coeffs[(-i) % n] += c
        return Cyclotomic(n, coeffs)

    def abs2(self) -> "Cyclotomic":
        return self * self.conjugate()

    # queries --------------------------------------------------------------
    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def as_fraction(self) -> Fraction | None:
        """The value as a Fraction if it is rational, else None."""
        if any(self.coeffs[1:]):
            return None
        return self.coeffs[0] if self.coeffs else Fraction(0)

    def to_mpc(self, dps: int = 50):
        with mpmath.workdps(dps):
            z = mpmath.exp(2j * mpmath.pi / self.conductor)
            total = mpmath.mpc(0)
            for i, c in enumerate(self.coeffs):
                if c:
                    total += mpmath.mpf(c.numerator) / c.denominator * z**i
            return total

    def __complex__(self) -> complex:
        z = cmath.exp(2j * math.pi / self.conductor)
        return complex(sum(float(c) * z**i for i, c in enumerate(self.coeffs) if c))

    def __eq__(self, other):
        try:
            a, b = self._common(other)
        except TypeError:
            return NotImplemented
        return a.coeffs == b.coeffs

    __hash__ = None

    def __repr__(self):
        if self.as_fraction() is not None:
            return f"Cyclotomic.rational({self.as_fraction()})"
        terms = " + ".join(f"({c})*z^{i}" for i, c in enumerate(self.coeffs) if c)
        return f"Cyclotomic[{self.conductor}]({terms})"

    def __str__(self):
        r = self.as_fraction()
        if r is not None:
            return str(r)
        terms = " + ".join(f"{c}*z{self.conductor}^{i}" for i, c in enumerate(self.coeffs) if c)
        return terms


def _coerce(x) -> Cyclotomic:
    if isinstance(x, Cyclotomic):
        return x
    if isinstance(x, (int, Rational)):
        return Cyclotomic.rational(x)
    if isinstance(x, float):
        return Cyclotomic.rational(Fraction(x))
    if isinstance(x, complex):
        return exact_from_complex(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Cyclotomic")


def exact_from_complex(z: complex) -> Cyclotomic:
    """The exact Gaussian rational equal to a double-precision complex number."""
    z = complex(z)
    if z.imag == 0:
        return Cyclotomic.rational(Fraction(z.real))
    return Cyclotomic.gaussian(Fraction(z.real), Fraction(z.imag))


def abs_le(z, bound) -> bool:
    """Decide ``|z| <= bound`` for an exact value and a nonnegative rational bound.

    |z|^2 is an exact real cyclotomic number; its sign against bound^2 is
    settled numerically at rising precision, and by exact equality when the
    two agree to every digit carried.
    """
    z = _coerce(z)
    bound = Fraction(bound)
    if bound < 0:
        return False
    diff = z.abs2() - bound * bound
    r = diff.as_fraction()
    if r is not None:
        return r <= 0
    if diff.is_zero():
        return True
    for dps in (50, 200, 1000):
        val = diff.to_mpc(dps).real
        if abs(val) > mpmath.mpf(10) ** (-(dps - 10)):
            return val < 0
    raise ArithmeticError("could not separate |z|^2 from bound^2")
