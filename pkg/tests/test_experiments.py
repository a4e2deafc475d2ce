from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymfree.errors import CapExceededError, MissingTargetError, NormExceededError, UnknownMomentError
from asymfree.exactnum import Cyclotomic
from asymfree.experiments import (
    MicrostateSpec,
    MLetter,
    conjugation_freeness_fraction,
    conjugation_spec,
    decay_sweep,
    diagonal_x_moments,
    enumerate_monomials,
    format_monomial,
    free_moment,
    mc_tail_probability,
    mc_trace_moment,
    microstate_fraction,
    microstate_spec,
    parse_monomial,
    trace_samples,
)
from asymfree.matcore import make_traceless_diagonal
from asymfree.weingarten import exact_word_moment
from asymfree.wordcore import AlternatingExpression, word


def expr(*words):
    return AlternatingExpression(tuple((word(*w), s) for s, w in enumerate(words, start=1)))


# --- free moments ------------------------------------------------------------

def moments(c, c2=1):
    return {((1, 1, 0),): c, ((1, 2, 0),): c2}


def test_free_moment_examples():
    assert free_moment("u1 x1 u1* x1", moments(0)) == 0
    c = Fraction(2, 7)
    assert free_moment("u1 x1 u1* x1", moments(c)) == c * c
    assert free_moment("u1 u1", {}) == 0
    assert free_moment("u1 u1*", {}) == 1
    assert free_moment("x1 x1", moments(0, Fraction(3, 5))) == Fraction(3, 5)


def test_free_moment_four_block_formula():
    # tau(a b a' b') for free a, a' (from u x1 u*) and b, b' (x2):
    # tau(aa') tau(b) tau(b') + tau(a) tau(a') tau(bb') - tau(a) tau(a') tau(b) tau(b')
    xm = {((1, 1, 0),): Fraction(1, 2), ((1, 2, 0),): Fraction(3, 4), ((2, 1, 0),): Fraction(1, 3), ((2, 2, 0),): Fraction(1, 5)}
    a1, a2, b1, b2 = Fraction(1, 2), Fraction(3, 4), Fraction(1, 3), Fraction(1, 5)
    expected = a2 * b1**2 + a1**2 * b2 - a1**2 * b1**2
    assert free_moment("u1 x1 u1* x2 u1 x1 u1* x2", xm, cap=8) == expected


def test_free_moment_errors():
    with pytest.raises(CapExceededError):
        free_moment("u1 " * 7, {})
    with pytest.raises(UnknownMomentError):
        free_moment("u1 x1 u1* x2", moments(Fraction(1, 2)))


def test_monomial_parsing():
    mono = parse_monomial("u1 x2* u1*")
    assert mono == (MLetter("u", 1), MLetter("x", 2, True), MLetter("u", 1, True))
    assert format_monomial(mono) == "u1 x2* u1*"


def test_diagonal_moments_match_free_moment_for_x_words():
    rng = np.random.default_rng(1)
    d1 = rng.normal(size=6) + 1j * rng.normal(size=6)
    d2 = rng.normal(size=6)
    xm = diagonal_x_moments([d1, d2])
    value = free_moment("x1 x2 x1*", xm)
    assert value == pytest.approx(np.mean(d1 * d2 * np.conj(d1)))


@st.composite
def alternating_centered(draw):
    """Alternating products of centered factors from distinct free algebras."""
    blocks = []
    prev = None
    for _ in range(draw(st.integers(2, 6))):
        choice = draw(st.sampled_from([a for a in ("x", "u1", "u2") if a != prev]))
        if choice == "x":
            j = draw(st.integers(1, 2))
            blocks.append([MLetter("x", j, draw(st.booleans()))])
        else:
            p = draw(st.sampled_from([-2, -1, 1, 2]))
            blocks.append([MLetter("u", int(choice[1]), p < 0)] * abs(p))
        prev = choice
    return tuple(x for b in blocks for x in b)


_rng = np.random.default_rng(5)
_D = [v - v.mean() for v in (_rng.normal(size=5) + 1j * _rng.normal(size=5), _rng.normal(size=5))]
_XM = diagonal_x_moments(_D)


@settings(max_examples=50, deadline=None)
@given(alternating_centered())
def test_alternating_centered_products_vanish(mono):
    assert abs(free_moment(mono, _XM, cap=12)) < 1e-12


def test_enumerate_monomials_dedupes_rotations():
    monos = enumerate_monomials([("x", 1)], 2)
    assert [format_monomial(w) for w in monos] == ["x1", "x1*", "x1 x1", "x1 x1*", "x1* x1*"]
    assert all(len(w) <= 3 for w in enumerate_monomials([("x", 1), ("u", 1)], 3))


# --- Monte Carlo -----------------------------------------------------------

def test_mc_examples():
    x = make_traceless_diagonal(4, [1, -1, 0, 0])
    est = mc_trace_moment(expr((1,)), [x], 4, 1, 20000, 3)
    assert abs(est.mean) <= 4 * est.std_error_mean
    xs = [make_traceless_diagonal(4, "alternating"), make_traceless_diagonal(4, "roots")]
    est = mc_trace_moment(expr((1,), (-1,)), xs, 4, 1, 20000, 3)
    assert abs(est.mean) <= 4 * est.std_error_mean
    zero = make_traceless_diagonal(1, "balanced")
    est = mc_trace_moment(expr((1,)), [zero], 1, 1, 100, 3)
    assert est.mean == 0 and est.second_abs_moment == 0


def test_mc_estimate_invariants():
    xs = [make_traceless_diagonal(3, "roots")] * 2
    vals = trace_samples(expr((1,), (1,)), xs, 3, 1, 1000, 9)
    est = mc_trace_moment(expr((1,), (1,)), xs, 3, 1, 1000, 9)
    assert est.second_abs_moment >= abs(est.mean) ** 2 - 1e-12
    assert est.std_error_mean == pytest.approx(np.sqrt(np.sum(np.abs(vals - vals.mean()) ** 2) / 999 / 1000))
    assert (est.samples, est.master_seed) == (1000, 9)


@pytest.mark.parametrize("words", [((1,), (-1,)), ((1, 1), (-1,), (-1,)), ((1,), (2,), (-1,), (-2,)), ((1, 2), (-1, -2))])
@pytest.mark.parametrize("k", [4, 5])
def test_oracle_equivalence(words, k):
    e = expr(*words)
    xs = [make_traceless_diagonal(k, "balanced"), make_traceless_diagonal(k, "roots")] * 2
    exact = complex(exact_word_moment(e, xs, k))
    est = mc_trace_moment(e, xs, k, e.n, 20000, 31)
    assert abs(est.mean - exact) <= 4 * est.std_error_mean


def test_determinism_across_threads():
    xs = [make_traceless_diagonal(5, "roots")] * 2
    a = trace_samples(expr((1,), (2,)), xs, 5, 2, 2000, 4, threads=1)
    b = trace_samples(expr((1,), (2,)), xs, 5, 2, 2000, 4, threads=3)
    assert a.tobytes() == b.tobytes()


def test_tail_examples():
    x = make_traceless_diagonal(8, "alternating")
    e = expr((1,), (-1,))
    assert mc_tail_probability(e, [x, x], 8, 1, 1.01, 500, 2).fraction == 0
    e1 = expr((1,))
    frac = mc_tail_probability(e1, [make_traceless_diagonal(16, "alternating")], 16, 1, 1.0, 2000, 2)
    from asymfree.bounds import theorem_bounds
    rep = theorem_bounds(1, 1, 1, 16, 1.0)
    assert rep.tail_valid and frac.fraction <= min(1, rep.tail_bound)


def test_decay_sweep_rows():
    e = expr((1,), (-1,))
    rows = decay_sweep(e, "alternating", [6], 2000, 1)
    assert len(rows) == 1 and rows[0].k == 6
    rows = decay_sweep(e, "alternating", [4, 8], 4000, 1)
    for r in rows:
        assert abs(r.estimate.mean) <= r.bounds.mean_bound
        assert r.estimate.second_abs_moment <= r.bounds.second_moment_bound


# --- microstates -----------------------------------------------------------

def test_microstate_only_x_monomials():
    x = make_traceless_diagonal(8, "alternating")
    spec = microstate_spec([x], 0, 4, 1e-9)
    assert microstate_fraction(8, 0, 1, spec, [x], 50, 1).fraction == 1


def test_microstate_wide_tolerance():
    x = make_traceless_diagonal(6, "alternating")
    spec = microstate_spec([x], 1, 2, 2.0)  # eps >= 2 R^m with R = 1
    assert microstate_fraction(6, 1, 1, spec, [x], 100, 1).fraction == 1


def test_conjugation_single_matrix():
    x = make_traceless_diagonal(5, "roots")
    spec = conjugation_spec([x], 3, 1e-9)
    assert conjugation_freeness_fraction(5, 1, spec, [x], 100, 2).fraction == 1


def test_microstate_errors():
    x = make_traceless_diagonal(4, "alternating", 2.0)
    with pytest.raises(NormExceededError):
        microstate_fraction(4, 1, 1, microstate_spec([x], 1, 2, 0.1, R=1.0), [x], 10, 1)
    spec = MicrostateSpec(1.0, 2, 0.1, {})
    with pytest.raises(MissingTargetError):
        microstate_fraction(4, 1, 1, spec, [make_traceless_diagonal(4, "alternating")], 10, 1)
    with pytest.raises(ValueError):
        MicrostateSpec(1.0, 1, 0.1, {parse_monomial("x1 x1"): 0})


def test_default_norm_cap():
    x = make_traceless_diagonal(4, "alternating", 3.0)
    assert microstate_spec([x], 1, 1, 0.1).R == 3.0
    assert microstate_spec([make_traceless_diagonal(4, "alternating", 0.5)], 1, 1, 0.1).R == 1.0
