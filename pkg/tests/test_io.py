import numpy as np
import pytest

from envwitness.errors import InvalidProtocol
from envwitness.io import (dump_protocol, dump_unitary, load_protocol, load_unitary,
                           protocol_hash)
from envwitness.quantum_core import deterministic_unitary_001, haar_unitary, projective_protocol


def test_protocol_roundtrip(tmp_path):
    p = projective_protocol(2, 2)
    path = tmp_path / "p.toml"
    dump_protocol(p, path)
    q = load_protocol(path)
    assert (q.d_S, q.d_E, q.alphabet_size) == (2, 2, 2)
    for a, b in zip((p.rho_S0, p.rho_E0, *p.povm), (q.rho_S0, q.rho_E0, *q.povm)):
        assert np.allclose(a, b)
    assert protocol_hash(p) == protocol_hash(q)
    assert protocol_hash(p) != protocol_hash(projective_protocol(3, 2))


def test_real_entries_and_defaults(tmp_path):
    path = tmp_path / "p.toml"
    path.write_text("d_S = 2\nrho_S0 = [[1, 0], [0, 0]]\n"
                    "povm = [[[0.5, 0], [0, 0.5]], [[0.5, 0], [0, 0.5]]]\n")
    p = load_protocol(path)
    assert p.d_E == 1 and p.alphabet_size == 2
    assert np.allclose(p.povm[0], np.eye(2) / 2)


def test_complex_pairs(tmp_path):
    path = tmp_path / "p.toml"
    path.write_text("d_S = 2\nrho_S0 = [[[0.5, 0], [0, -0.5]], [[0, 0.5], [0.5, 0]]]\n"
                    "povm = [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]\n")
    p = load_protocol(path)
    assert np.isclose(p.rho_S0[0, 1], -0.5j)
    assert not p.is_real


def test_missing_field(tmp_path):
    path = tmp_path / "p.toml"
    path.write_text("d_S = 2\n")
    with pytest.raises(InvalidProtocol):
        load_protocol(path)


def test_unitary_roundtrip(tmp_path, rng):
    for u in (deterministic_unitary_001(), haar_unitary(4, rng)):
        path = tmp_path / "u.toml"
        dump_unitary(u, path, note="x")
        assert np.allclose(load_unitary(path), u)
