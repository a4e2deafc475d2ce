"""Dense complex matrix helpers: normalized trace, unitarity checks, observables, file I/O."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from os import PathLike
from typing import Sequence

import numpy as np

from .errors import AlternatingOddKError, NormExceededError, TraceNotZeroError
from .exactnum import Cyclotomic, exact_from_complex

__all__ = [
    "DEFAULT_UNITARY_TOL",
    "UnitarityCheck",
    "DiagonalObservable",
    "normalized_trace",
    "check_unitary",
    "make_traceless_diagonal",
    "read_matrix",
    "write_matrix",
    "read_observable",
    "write_observable",
]

DEFAULT_UNITARY_TOL = 1e-10
_TRACE_TOL = 1e-12


def normalized_trace(a: np.ndarray) -> complex:
    """(1/k) Tr a; batched over leading axes."""
    a = np.asarray(a)
    k = a.shape[-1]
    return np.trace(a, axis1=-2, axis2=-1) / k


@dataclass(frozen=True)
class UnitarityCheck:
    passed: bool
    violation: float
    condition: int  # 1 = row/column norms, 2 = orthogonality, 0 = no violation
    location: tuple

    def __bool__(self):
        return self.passed


def check_unitary(a: np.ndarray, tol: float = DEFAULT_UNITARY_TOL) -> UnitarityCheck:
    """Test the two entrywise unitarity conditions.

    Condition 1: every row and every column has squared-modulus sum 1.
    Condition 2: distinct rows (and distinct columns) are orthogonal.
    The worst violation is reported with its location, e.g.
    ``("row", 0)`` or ``("cols", 1, 3)`` (0-based).
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    rows = a @ a.conj().T  # rows[i1, i2] = sum_j a[i1, j] conj(a[i2, j])
    cols = a.T @ a.conj()  # cols[j1, j2] = sum_i a[i, j1] conj(a[i, j2])

    worst = (0.0, 0, ())
    for name, gram in (("row", rows), ("col", cols)):
        dev = np.abs(np.real(np.diag(gram)) - 1.0)
        i = int(np.argmax(dev))
        if dev[i] > worst[0]:
            worst = (float(dev[i]), 1, (name, i))
    for name, gram in (("rows", rows), ("cols", cols)):
        off = np.abs(gram - np.diag(np.diag(gram)))
        i, j = np.unravel_index(int(np.argmax(off)), off.shape)
        if off[i, j] > worst[0]:
            worst = (float(off[i, j]), 2, (name, int(i), int(j)))
    violation, condition, location = worst
    return UnitarityCheck(violation <= tol, violation, condition if violation > 0 else 0, location)


@dataclass(frozen=True, eq=False)
class DiagonalObservable:
    """A trace-zero diagonal matrix diag(gamma(1), ..., gamma(k)) with sup-norm at most M.

    ``exact`` optionally carries the entries as exact cyclotomic numbers;
    when absent they are read off the double-precision entries.
    """

    diag: np.ndarray
    M: float
    exact: tuple[Cyclotomic, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        d = np.array(self.diag, dtype=complex)
        d.setflags(write=False)
        object.__setattr__(self, "diag", d)
        if d.ndim != 1 or d.size == 0:
            raise ValueError("diagonal must be a nonempty vector")
        if self.exact is not None and len(self.exact) != d.size:
            raise ValueError("exact entries must match the diagonal length")
        if self.exact is not None:
            if not sum(self.exact, Cyclotomic.rational(0)).is_zero():
                raise TraceNotZeroError("exact diagonal entries do not sum to zero")
        elif abs(d.sum()) > _TRACE_TOL:
            raise TraceNotZeroError(f"trace is {d.sum()!r}, not zero")
        if np.max(np.abs(d)) > self.M * (1 + 1e-12):
            raise NormExceededError(f"max |gamma| = {np.max(np.abs(d))} exceeds M = {self.M}")

    @property
    def k(self) -> int:
        return self.diag.size

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)

    def exact_entries(self) -> tuple[Cyclotomic, ...]:
        if self.exact is not None:
            return self.exact
        return tuple(exact_from_complex(g) for g in self.diag)

    def to_json(self) -> dict:
        return {"k": self.k, "diag": [[float(z.real), float(z.imag)] for z in self.diag], "M": float(self.M)}


def make_traceless_diagonal(k: int, pattern, M: float = 1.0) -> DiagonalObservable:
    """Build a trace-zero diagonal observable.

    ``pattern`` is ``"alternating"`` (M, -M, M, ...; even k only),
    ``"balanced"`` (alternating with a trailing 0 when k is odd),
    ``"roots_of_unity"`` (M times the k-th roots of unity; ``"roots"`` is an
    alias) or an explicit sequence of k entries.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if M <= 0:
        raise ValueError("M must be positive")
    m_exact = Fraction(M)
    if isinstance(pattern, str):
        if pattern == "alternating":
            if k % 2:
                raise AlternatingOddKError(f"alternating pattern needs even k, got {k}")
            signs = [1 if a % 2 == 0 else -1 for a in range(k)]
        elif pattern == "balanced":
            signs = [1 if a % 2 == 0 else -1 for a in range(k - k % 2)] + [0] * (k % 2)
        elif pattern in ("roots_of_unity", "roots"):
            if k == 1:
                raise TraceNotZeroError("the only first root of unity is 1; its trace is not zero")
            exact = tuple(Cyclotomic.root_of_unity(k, a, m_exact) for a in range(k))
            diag = M * np.exp(2j * np.pi * np.arange(k) / k)
            return DiagonalObservable(diag, M, exact)
        else:
            raise ValueError(f"unknown pattern {pattern!r}")
        exact = tuple(Cyclotomic.rational(s * m_exact) for s in signs)
        return DiagonalObservable(np.array(signs, dtype=complex) * M, M, exact)
    entries = np.asarray(pattern, dtype=complex)
    if entries.shape != (k,):
        raise ValueError(f"explicit diagonal must have length {k}, got shape {entries.shape}")
    return DiagonalObservable(entries, M)


def _pairs(a: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in a]


def _unpairs(rows: Sequence) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def write_matrix(path: str | PathLike, a: np.ndarray) -> None:
    a = np.asarray(a, dtype=complex)
    doc = {"k": int(a.shape[0]), "entries": [_pairs(row) for row in a]}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_matrix(path: str | PathLike) -> np.ndarray:
    with open(path) as fh:
        doc = json.load(fh)
    a = _unpairs(doc["entries"])
    if a.shape != (doc["k"], doc["k"]):
        raise ValueError(f"matrix file declares k = {doc['k']} but holds shape {a.shape}")
    return a


def write_observable(path: str | PathLike, x: DiagonalObservable | Sequence[DiagonalObservable]) -> None:
    doc = x.to_json() if isinstance(x, DiagonalObservable) else [o.to_json() for o in x]
    with open(path, "w") as fh:
        json.dump(doc, fh)


def observable_from_json(doc: dict) -> DiagonalObservable:
    d = _unpairs(doc["diag"])
    if d.shape != (doc["k"],):
        raise ValueError(f"observable declares k = {doc['k']} but holds {d.shape[0]} entries")
    return DiagonalObservable(d, float(doc["M"]))


def read_observable(path: str | PathLike) -> list[DiagonalObservable]:
    """Read one observable or a JSON array of them."""
    with open(path) as fh:
        doc = json.load(fh)
    docs = doc if isinstance(doc, list) else [doc]
    return [observable_from_json(d) for d in docs]
