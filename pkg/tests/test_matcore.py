import numpy as np
import pytest

from asymfree.errors import AlternatingOddKError, NormExceededError, TraceNotZeroError
from asymfree.exactnum import Cyclotomic
from asymfree.haarsample import SeededStream, sample_unitary
from asymfree.matcore import (
    DiagonalObservable,
    check_unitary,
    make_traceless_diagonal,
    normalized_trace,
    read_matrix,
    read_observable,
    write_matrix,
    write_observable,
)


def test_normalized_trace_examples():
    assert normalized_trace(np.eye(4)) == 1
    assert normalized_trace(np.diag([1, -1])) == 0
    g = np.array([2, 3j, -1, 0.5])
    assert np.isclose(normalized_trace(np.diag(g)), g.mean())


def test_trace_is_tracial_and_conjugation_invariant():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    b = rng.normal(size=(5, 5))
    assert np.isclose(normalized_trace(a @ b), normalized_trace(b @ a))
    for i in range(5):
        u = sample_unitary(5, SeededStream(3), i)
        assert abs(normalized_trace(u @ a @ u.conj().T) - normalized_trace(a)) < 1e-10


def test_check_unitary_examples():
    assert check_unitary(np.eye(3))
    bad = np.eye(2)
    bad[0, 0] = 2
    res = check_unitary(bad)
    assert not res and res.condition == 1 and res.violation == pytest.approx(3)
    assert check_unitary(np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def test_check_unitary_orthogonality_violation():
    a = np.array([[1, 0.1], [0, 1]]) / np.sqrt([[1, 1.01], [1, 1.01]])
    res = check_unitary(a)
    assert not res
    assert res.condition in (1, 2)


def test_unitary_implies_small_product_error():
    tol = 1e-10
    for k in (2, 7, 16):
        u = sample_unitary(k, SeededStream(5))
        assert check_unitary(u, tol)
        assert np.max(np.abs(u @ u.conj().T - np.eye(k))) <= k * tol


def test_make_traceless_diagonal_examples():
    assert np.array_equal(make_traceless_diagonal(4, "alternating").diag, [1, -1, 1, -1])
    assert np.array_equal(make_traceless_diagonal(3, "balanced").diag, [1, -1, 0])
    x = make_traceless_diagonal(3, "roots_of_unity")
    w = np.exp(2j * np.pi / 3)
    assert np.allclose(x.diag, [1, w, w * w])
    assert sum(x.exact, Cyclotomic.rational(0)).is_zero()
    assert make_traceless_diagonal(6, "roots", 2.5).M == 2.5


def test_make_traceless_diagonal_errors():
    with pytest.raises(AlternatingOddKError):
        make_traceless_diagonal(5, "alternating")
    with pytest.raises(TraceNotZeroError):
        make_traceless_diagonal(2, [1, 1])
    with pytest.raises(NormExceededError):
        make_traceless_diagonal(2, [3, -3], M=1)
    with pytest.raises(ValueError):
        make_traceless_diagonal(3, [1, -1])
    with pytest.raises(TraceNotZeroError):
        make_traceless_diagonal(1, "roots")


@pytest.mark.parametrize("k", [1, 2, 3, 7, 8])
def test_patterns_satisfy_invariants_exactly(k):
    for pattern in ("balanced", "roots"):
        if pattern == "roots" and k == 1:
            continue
        x = make_traceless_diagonal(k, pattern, 1.5)
        assert sum(x.exact_entries(), Cyclotomic.rational(0)).is_zero()
        assert np.max(np.abs(x.diag)) <= 1.5 + 1e-12


def test_matrix_and_observable_files_round_trip(tmp_path):
    u = sample_unitary(3, SeededStream(1))
    write_matrix(tmp_path / "u.json", u)
    assert np.array_equal(read_matrix(tmp_path / "u.json"), u)
    xs = [make_traceless_diagonal(4, "roots"), make_traceless_diagonal(4, [0.5, -0.5, 1j, -1j])]
    write_observable(tmp_path / "x.json", xs)
    back = read_observable(tmp_path / "x.json")
    assert all(np.array_equal(a.diag, b.diag) and a.M == b.M for a, b in zip(xs, back))
    write_observable(tmp_path / "one.json", xs[0])
    assert len(read_observable(tmp_path / "one.json")) == 1


def test_observable_is_immutable():
    x = DiagonalObservable(np.array([1.0, -1.0]), 1.0)
    with pytest.raises(ValueError):
        x.diag[0] = 5
