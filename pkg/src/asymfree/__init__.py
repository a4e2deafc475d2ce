"""Numerical and exact checks of asymptotic freeness for Haar unitaries and diagonal matrices."""
from .errors import AsymfreeError
from .wordcore import AlternatingExpression, Letter, ReducedWord, evaluate, inverse, reduce, word
from .matcore import DiagonalObservable, check_unitary, make_traceless_diagonal, normalized_trace
from .haarsample import SeededStream, sample_batch, sample_tuple, sample_unitary
from .weingarten import EntryMomentSpec, exact_entry_moment, exact_word_moment, weingarten_table
from .bounds import bell, falling_factorial, theorem_bounds
from .experiments import free_moment, mc_tail_probability, mc_trace_moment

__version__ = "0.1.0"
