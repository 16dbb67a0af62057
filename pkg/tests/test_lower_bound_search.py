import numpy as np
import pytest
import scipy.linalg

from conftest import seq
from envwitness.lower_bound_search import (SearchConfig, hermitian_from_params,
                                           maximize_probability, params_from_hermitian,
                                           params_from_unitary, probability_and_gradient)
from envwitness.quantum_core import (MeasurementProtocol, deterministic_unitary_001,
                                     embed_unitary, projective_protocol, sequence_probability)


def test_parameter_maps_roundtrip(rng):
    theta = rng.standard_normal(16)
    h = hermitian_from_params(theta, 4)
    assert np.allclose(h, h.conj().T)
    assert np.allclose(params_from_hermitian(h), theta)


def test_unitary_logarithm(rng):
    u = deterministic_unitary_001()
    v = scipy.linalg.expm(1j * hermitian_from_params(params_from_unitary(u), 6))
    assert np.allclose(u, v)


@pytest.mark.parametrize("d_E,text", [(1, "01"), (2, "001"), (2, "0110"), (3, "001")])
def test_gradient_vs_finite_differences(rng, d_E, text):
    p = projective_protocol(d_E, 2)
    s = seq(text)
    h = 1e-5
    for _ in range(3):
        theta = rng.uniform(-np.pi, np.pi, p.d_ES ** 2) / p.d_ES
        val, grad = probability_and_gradient(theta, p, s)
        u = scipy.linalg.expm(1j * hermitian_from_params(theta, p.d_ES))
        assert abs(val - sequence_probability(p, u, s)) < 1e-12
        fd = np.empty_like(grad)
        for k in range(len(theta)):
            e = np.zeros_like(theta)
            e[k] = h
            fd[k] = (probability_and_gradient(theta + e, p, s)[0]
                     - probability_and_gradient(theta - e, p, s)[0]) / (2 * h)
        assert np.linalg.norm(grad - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-12)


def test_gradient_complex_protocol(rng):
    w = scipy.linalg.expm(1j * hermitian_from_params(rng.standard_normal(4), 2))
    base = projective_protocol(2, 2)
    p = MeasurementProtocol(2, 2, 2, w @ base.rho_S0 @ w.conj().T, base.rho_E0,
                            tuple(w @ e @ w.conj().T for e in base.povm))
    theta = rng.standard_normal(16) / 4
    _, grad = probability_and_gradient(theta, p, seq("011"))
    h = 1e-5
    fd = np.array([(probability_and_gradient(theta + h * e, p, seq("011"))[0]
                    - probability_and_gradient(theta - h * e, p, seq("011"))[0]) / (2 * h)
                   for e in np.eye(16)])
    assert np.linalg.norm(grad - fd) <= 1e-5 * np.linalg.norm(fd)


def test_search_d2_reaches_target():
    res = maximize_probability(projective_protocol(2, 2), seq("001"), SearchConfig(seed=7))
    assert res.value >= 0.43
    assert res.restarts_used <= 64
    assert np.allclose(res.unitary.conj().T @ res.unitary, np.eye(4), atol=1e-9)
    assert abs(sequence_probability(projective_protocol(2, 2), res.unitary, seq("001")) - res.value) < 1e-9


def test_search_d3_reaches_one():
    res = maximize_probability(projective_protocol(3, 2), seq("001"), SearchConfig(seed=0))
    assert res.value >= 1 - 1e-6


def test_search_constant_sequence():
    res = maximize_probability(projective_protocol(2, 2), seq("000"), SearchConfig(seed=1, restarts=8))
    assert res.value >= 1 - 1e-9


def test_warm_start_is_used():
    res = maximize_probability(projective_protocol(3, 2), seq("001"),
                               SearchConfig(restarts=0), warm_starts=[deterministic_unitary_001()])
    assert res.restarts_used == 1 and res.value >= 1 - 1e-9


def test_monotone_in_environment():
    small = maximize_probability(projective_protocol(1, 2), seq("001"), SearchConfig(seed=3, restarts=8))
    big = maximize_probability(projective_protocol(2, 2), seq("001"), SearchConfig(seed=3, restarts=4),
                               warm_starts=[embed_unitary(small.unitary, 2, 2)])
    assert big.value >= small.value - 1e-6


def test_deterministic_given_seed():
    cfg = SearchConfig(seed=11, restarts=3)
    a = maximize_probability(projective_protocol(2, 2), seq("0110"), cfg)
    b = maximize_probability(projective_protocol(2, 2), seq("0110"), cfg)
    assert a.value == b.value


def test_trajectory_and_dict():
    res = maximize_probability(projective_protocol(1, 2), seq("01"),
                               SearchConfig(seed=0, restarts=2, record_trajectory=True))
    assert res.trajectory is None or all(len(t) == 2 for t in res.trajectory)
    d = res.to_dict()
    assert d["schema"] == "envwitness.search/1"
    u = np.array([[complex(*z) for z in row] for row in d["unitary"]])
    assert np.allclose(u, res.unitary)
    with pytest.raises(ValueError):
        maximize_probability(projective_protocol(1, 2), seq("01"), SearchConfig(step_rule="adam"))
