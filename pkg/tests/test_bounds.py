import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymfree.bounds import (
    InjectionInstance,
    bell,
    brute_injection_sum,
    corollary_intersection_bound,
    falling_factorial,
    injection_sum_bound,
    moment_integral_bounds,
    set_partitions,
    theorem_bounds,
)
from asymfree.errors import CapExceededError, HypothesisViolatedError

from oracles import bell_by_stirling


def test_bell_examples_and_oracle():
    assert (bell(0), bell(1), bell(3), bell(10)) == (1, 1, 5, 115975)
    for m in range(0, 16):
        assert bell(m) == bell_by_stirling(m)
    for m in range(0, 9):
        parts = list(set_partitions(m))
        assert len(parts) == len(set(parts)) == bell(m)
    with pytest.raises(CapExceededError):
        bell(31)


def test_set_partitions_block_limit():
    assert all(max(p) < 2 for p in set_partitions(5, 2))
    assert sum(1 for _ in set_partitions(5, 2)) == 1 + 15  # S(5,1) + S(5,2)


def test_falling_factorial():
    assert falling_factorial(5, 2) == 20
    assert falling_factorial(7, 0) == 1
    assert falling_factorial(4, 4) == 24
    with pytest.raises(HypothesisViolatedError):
        falling_factorial(3, 4)


def test_brute_injection_examples():
    assert abs(brute_injection_sum(InjectionInstance(3, ([1, -2, 1],)))) < 1e-12
    assert brute_injection_sum(InjectionInstance(3, (), ([2.5] * 3,))) == pytest.approx(7.5)
    assert brute_injection_sum(InjectionInstance(2, ([1, -1], [1, -1]))) == pytest.approx(-2)
    with pytest.raises(HypothesisViolatedError):
        InjectionInstance(2, ([1, 1],))
    with pytest.raises(CapExceededError):
        brute_injection_sum(InjectionInstance(10, (), ([1] * 10,)))


def test_injection_bound_examples():
    assert injection_sum_bound(1, 0, 3, [1]) == pytest.approx(math.sqrt(3))
    assert injection_sum_bound(0, 2, 5, [1, 1]) == 25
    assert injection_sum_bound(2, 1, 4, [1, 1, 2]) == 288


values = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 3), st.integers(0, 2), st.data())
def test_injection_bound_holds(k, n, m, data):
    if n + m == 0:
        return
    fs = [data.draw(st.lists(values, min_size=k, max_size=k)) for _ in range(n)]
    gs = [data.draw(st.lists(values, min_size=k, max_size=k)) for _ in range(m)]
    inst = InjectionInstance.centered(k, fs, gs)
    assert abs(brute_injection_sum(inst)) <= injection_sum_bound(n, m, k, inst.norms()) * (1 + 1e-9) + 1e-9


def test_moment_integral_bounds():
    assert moment_integral_bounds(d=2, k=6).lemma3 == Fraction(1, 30)
    assert moment_integral_bounds(m=2, k=4).lemma5 == 16
    assert Fraction(1, falling_factorial(4, 2)) <= Fraction(2**2, 4**2)
    with pytest.raises(HypothesisViolatedError):
        moment_integral_bounds(m=5, k=4)
    with pytest.raises(HypothesisViolatedError):
        moment_integral_bounds(d=5, k=4)


def test_theorem_bound_examples():
    r = theorem_bounds(2, 1, 2, 100, 0.1)
    assert r.exact_mean_bound == Fraction(128, 100) and r.mean_bound == 1.28
    assert r.exact_second_moment_bound == Fraction(983040, 10**4)
    assert r.tail_valid is False
    assert theorem_bounds(2, 1, 2, 2561, 0.1).tail_valid
    assert not theorem_bounds(2, 1, 2, 2560, 0.1).tail_valid
    assert theorem_bounds(2, 1, 2, 100).tail_bound is None


def test_theorem_bound_directions():
    for m in (1, 2, 3):
        for w in (1, 2, 4):
            prev = None
            for k in (5, 10, 50):
                r = theorem_bounds(m, 1.5, w, k, 0.5)
                if prev:
                    assert r.exact_mean_bound < prev.exact_mean_bound
                    assert r.exact_second_moment_bound < prev.exact_second_moment_bound
                    assert r.exact_tail_bound < prev.exact_tail_bound
                prev = r
            assert theorem_bounds(m, 2, w, 10).exact_mean_bound > theorem_bounds(m, 1, w, 10).exact_mean_bound
            assert theorem_bounds(m, 1, w + 1, 10).exact_mean_bound > theorem_bounds(m, 1, w, 10).exact_mean_bound


def test_huge_bounds_stay_exact():
    r = theorem_bounds(12, 3, 40, 7)
    assert r.mean_bound == math.inf or r.mean_bound > 1e100
    assert r.exact_mean_bound > 0


def test_corollary_bound():
    assert corollary_intersection_bound(3, 1, 1, 1, 1000, 1) == pytest.approx(0.999616, abs=1e-15)
    assert corollary_intersection_bound(3, 1, 1, 1, 1000, 1, exact=True) == Fraction(999616, 10**6)
    assert corollary_intersection_bound(0, 2, 1, 2, 5, 0.1) == 1
    assert corollary_intersection_bound(4, 2, 1, 2, 3, 0.1) == 0
    assert np.isfinite(corollary_intersection_bound(1, 1, 1, 1, 10, 1))
