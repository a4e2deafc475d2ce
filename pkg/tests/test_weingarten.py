import itertools
from fractions import Fraction

import numpy as np
import pytest

from asymfree.errors import CapExceededError, DimensionTooSmallError
from asymfree.exactnum import Cyclotomic
from asymfree.experiments import mc_trace_moment
from asymfree.haarsample import SeededStream, map_chunks, sample_batch
from asymfree.matcore import make_traceless_diagonal
from asymfree.suites import check_permutation_invariance, check_vanishing
from asymfree.weingarten import (
    EntryMomentSpec,
    cycle_count,
    entry_moment_vanishes,
    exact_entry_moment,
    exact_second_moment,
    exact_word_moment,
    weingarten_sum,
    weingarten_table,
)
from asymfree.wordcore import AlternatingExpression, word

from oracles import gram_weingarten, naive_word_moment


def expr(*words):
    return AlternatingExpression(tuple((word(*w), s) for s, w in enumerate(words, start=1)))


def test_small_tables():
    assert weingarten_table(1, 5).expand() == {(0,): Fraction(1, 5)}
    for k in range(2, 7):
        t = weingarten_table(2, k).expand()
        assert t[(0, 1)] == Fraction(1, k * k - 1)
        assert t[(1, 0)] == Fraction(-1, k * (k * k - 1))
    t = weingarten_table(2, 2).expand()
    assert (t[(0, 1)], t[(1, 0)]) == (Fraction(1, 3), Fraction(-1, 6))


@pytest.mark.parametrize("m,k", [(m, k) for m in (1, 2, 3, 4) for k in range(m, m + 3)])
def test_table_matches_full_gram_inversion(m, k):
    assert weingarten_table(m, k).expand() == gram_weingarten(m, k)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_table_normalization(m):
    for k in (m, m + 1, m + 4):
        table = weingarten_table(m, k).expand()
        assert sum(v * k ** cycle_count(p) for p, v in table.items()) == 1


def test_table_errors():
    with pytest.raises(DimensionTooSmallError):
        weingarten_table(3, 2)
    with pytest.raises(CapExceededError):
        weingarten_table(6, 8)
    assert weingarten_table(6, 6, cap=6).m == 6
    with pytest.raises(CapExceededError):
        weingarten_table(7, 9, cap=7)


def test_entry_moment_examples():
    one = EntryMomentSpec.single
    assert exact_entry_moment(one([(1, 1)], [(1, 1)], 3)) == Fraction(1, 3)
    assert exact_entry_moment(one([(1, 1), (2, 2)], [(1, 1), (2, 2)], 2)) == Fraction(1, 3)
    assert exact_entry_moment(one([(1, 1), (2, 2)], [(1, 2), (2, 1)], 2)) == Fraction(-1, 6)


def test_entry_moment_against_monte_carlo():
    stream = SeededStream(777)

    def chunk(idx):
        u = sample_batch(2, 1, stream, idx)[:, 0]
        return u[:, 0, 0] * u[:, 1, 1] * np.conj(u[:, 0, 1]) * np.conj(u[:, 1, 0])

    vals = np.concatenate(map_chunks(chunk, 10**6))
    se = np.sqrt(np.mean(np.abs(vals - vals.mean()) ** 2) / vals.size)
    assert abs(vals.mean() - (-1 / 6)) < 3 * se


def test_vanishing_examples():
    one = EntryMomentSpec.single
    assert entry_moment_vanishes(one([(1, 1)], [], 3))
    assert entry_moment_vanishes(one([(1, 1)], [(2, 1)], 3))
    assert not entry_moment_vanishes(one([(1, 1)], [(1, 1)], 3))
    two = EntryMomentSpec(((1, 1, 1), (1, 1, 2)), ((1, 1, 1), (1, 1, 1)), 3)
    assert entry_moment_vanishes(two)
    assert exact_entry_moment(two) == 0


def test_multi_generator_factorizes():
    spec = EntryMomentSpec(((1, 1, 1), (2, 2, 2)), ((1, 1, 1), (2, 2, 2)), 3)
    assert exact_entry_moment(spec) == Fraction(1, 9)


def test_small_exhaustive_lemma_checks():
    assert check_permutation_invariance(3, 3).passed
    assert check_vanishing(3, 3).passed


def test_word_moment_examples():
    for pattern in ("balanced", "roots"):
        assert exact_word_moment(expr((1,)), [make_traceless_diagonal(3, pattern)], 3).is_zero()
    xs = [make_traceless_diagonal(4, "roots"), make_traceless_diagonal(4, [2, -1, -1, 0], 2)]
    assert exact_word_moment(expr((1,), (-1,)), xs, 4).is_zero()


def test_golden_value():
    e = expr((1,), (1,), (-1,), (-1,))
    x = make_traceless_diagonal(2, "alternating")
    assert exact_word_moment(e, [x] * 4, 2) == Fraction(1, 3)


def test_golden_value_against_monte_carlo():
    e = expr((1,), (1,), (-1,), (-1,))
    x = make_traceless_diagonal(2, "alternating")
    est = mc_trace_moment(e, [x] * 4, 2, 1, 10**6, 20240611)
    assert abs(est.mean - 1 / 3) < 3 * est.std_error_mean


CASES = [
    ((1,), (-1,)),
    ((1,), (1,), (-1,), (-1,)),
    ((1,), (2,), (-1,), (-2,)),
    ((1, 1), (-1, -1)),
    ((1, 2), (-2, -1)),
    ((1,), (1,), (1,)),
    ((1, -2), (2, -1)),
]


@pytest.mark.parametrize("words", CASES)
@pytest.mark.parametrize("k", [3, 4])
def test_word_moment_matches_naive_expansion(words, k):
    e = expr(*words)
    diags = [[Fraction(v) for v in d] for d in ([1, -1, 0, 0][:k], [2, 0, -1, -1][:k], [1, 1, -2, 0][:k], [0, 3, -3, 0][:k])]
    diags = [d if sum(d) == 0 else [d[0], -d[0]] + [Fraction(0)] * (k - 2) for d in diags]
    xs = [make_traceless_diagonal(k, [float(v) for v in d], 3) for d in diags]
    got = exact_word_moment(e, xs, k)
    assert got == naive_word_moment(e, diags[: e.w], k)


def test_word_moment_with_roots_is_exact_cyclotomic():
    e = expr((1,), (2,), (-1,), (-2,))
    xs = [make_traceless_diagonal(4, "roots")] * 4
    value = exact_word_moment(e, xs, 4)
    assert isinstance(value, Cyclotomic)
    est = mc_trace_moment(e, xs, 4, 2, 20000, 8)
    assert abs(est.mean - complex(value)) < 4 * est.std_error_mean
    assert exact_word_moment(e, [make_traceless_diagonal(4, "alternating")] * 4, 4) == Fraction(1, 16)


def test_second_moment_against_monte_carlo():
    e = expr((1,), (-1,))
    x = make_traceless_diagonal(4, "alternating")
    exact = exact_second_moment(e, [x, x], 4)
    est = mc_trace_moment(e, [x, x], 4, 1, 40000, 5)
    assert abs(est.second_abs_moment - float(exact.as_fraction())) < 4 * est.std_error_second


def test_index_map_guard():
    e = expr((1,), (1,), (-1,), (-1,))
    xs = [make_traceless_diagonal(30, "balanced")] * 4
    with pytest.raises(CapExceededError):
        exact_word_moment(e, xs, 30, max_maps=10**5)


def test_raw_sum_has_phase_rule():
    assert weingarten_sum((1,), (1,), (), (), 3) == 0
    assert weingarten_sum((), (), (), (), 3) == 1
    for rows in itertools.product((1, 2), repeat=2):
        assert weingarten_sum(rows, (1, 2), rows, (1, 2), 2) >= 0
