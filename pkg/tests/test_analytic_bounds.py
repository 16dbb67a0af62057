import itertools
from fractions import Fraction

import numpy as np
import pytest

from conftest import seq
from envwitness.analytic_bounds import (Triviality, deterministic_complexity,
                                        deterministic_complexity_bruteforce, deterministic_model,
                                        omega_one, triviality_check)
from envwitness.quantum_core import (OutcomeSequence, dilate_kraus, embed_unitary,
                                     projective_protocol, sequence_probability)


@pytest.mark.parametrize("text,expected", [
    ("0", Fraction(1)),
    ("000", Fraction(1)),
    ("01", Fraction(1, 4)),
    ("001", Fraction(4, 27)),
    ("0001", Fraction(27, 256)),
    ("0011", Fraction(1, 16)),
    ("00101", Fraction(108, 3125)),
])
def test_omega_one_values(text, expected):
    b = omega_one(seq(text))
    assert b.value == expected
    assert b.per_symbol_probs == tuple(Fraction(n, len(text)) for n in seq(text).counts)


def test_omega_one_float_and_dict():
    b = omega_one(seq("00101"))
    assert b.real == 0.03456
    assert b.to_dict()["value"] == "108/3125"


def test_omega_one_unused_symbol():
    s = OutcomeSequence((0, 0, 2), alphabet_size=3)
    assert omega_one(s).value == Fraction(4, 27)
    assert omega_one(s).per_symbol_probs[1] == 0


def test_omega_one_invariances():
    rng = np.random.default_rng(0)
    for _ in range(30):
        symbols = tuple(int(x) for x in rng.integers(0, 3, rng.integers(1, 8)))
        s = OutcomeSequence(symbols, 3)
        perm = tuple(rng.permutation(symbols))
        relabel = tuple((x + 1) % 3 for x in symbols)
        assert omega_one(OutcomeSequence(perm, 3)).value == omega_one(s).value
        assert omega_one(OutcomeSequence(relabel, 3)).value == omega_one(s).value


@pytest.mark.parametrize("text,dc", [
    ("000", 1), ("001", 3), ("0001", 4), ("0010", 3), ("0011", 3),
    ("0110", 3), ("0101", 2), ("00101", 3), ("01", 2),
])
def test_dc_examples(text, dc):
    assert deterministic_complexity(seq(text)) == dc


@pytest.mark.parametrize("L", range(1, 9))
def test_dc_matches_bruteforce_binary(L):
    for symbols in itertools.product((0, 1), repeat=L):
        s = OutcomeSequence(symbols)
        assert deterministic_complexity(s) == deterministic_complexity_bruteforce(s), symbols


def test_dc_matches_bruteforce_ternary():
    for L in range(1, 7):
        for symbols in itertools.product((0, 1, 2), repeat=L):
            s = OutcomeSequence(symbols, 3)
            assert deterministic_complexity(s) == deterministic_complexity_bruteforce(s), symbols


def test_dc_bounds():
    for L in range(1, 8):
        for symbols in itertools.product((0, 1), repeat=L):
            s = OutcomeSequence(symbols)
            dc = deterministic_complexity(s)
            assert 1 <= dc <= L
            assert (dc == 1) == (len(set(symbols)) == 1)


@pytest.mark.parametrize("text", ["0010", "0011", "0110", "00101", "0001", "011010"])
def test_model_reproduces_sequence(text):
    s = seq(text)
    m = deterministic_model(s)
    assert m.n_states == deterministic_complexity(s)
    assert m.run(s.L) == s.symbols
    # the model as an instrument, dilated, gives probability one
    u = dilate_kraus(m.kraus(2), 2)
    p = projective_protocol(m.n_states, 2)
    assert abs(sequence_probability(p, u, s) - 1) < 1e-10
    big = embed_unitary(u, 2, m.n_states + 1)
    assert abs(sequence_probability(projective_protocol(m.n_states + 1, 2), big, s) - 1) < 1e-10


def test_triviality_examples():
    assert triviality_check(seq("001"), 2, 3) is Triviality.TRIVIALLY_ONE
    assert triviality_check(seq("001"), 2, 2) is Triviality.UNKNOWN
    for d_E in (1, 2, 5):
        assert triviality_check(seq("01"), 1, d_E) is Triviality.STRICTLY_BELOW_ONE
    assert triviality_check(seq("000"), 2, 1) is Triviality.TRIVIALLY_ONE
