import json

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import seq
from envwitness.errors import NoReduction
from envwitness.quantum_core import MeasurementProtocol, projective_protocol
from envwitness.relaxation_builder import (RelaxationSpec, SymmetricConstraints,
                                           build_relaxation, symmetric_objective)
from envwitness.sdp_model import SdpProblem, SolverConfig, solve
from envwitness.sparse_reducer import (SparsityPattern, base_sparsity, complete_components,
                                       effective_sparsity, extend_sparsity, reduce_problem)


def sym_matrix(n, entries):
    m = np.zeros((n, n))
    for i, j, v in entries:
        m[i, j] = m[j, i] = v
    return m


def noisy_protocol(d_E, eta=0.9):
    p = projective_protocol(d_E, 2)
    povm = (np.diag([eta, 1 - eta]), np.diag([1 - eta, eta]))
    return MeasurementProtocol(2, d_E, 2, p.rho_S0, p.rho_E0, povm)


# --- pattern primitives -----------------------------------------------------------

def test_base_sparsity_examples():
    assert base_sparsity(np.zeros((4, 4))).indices == {(i, i) for i in range(4)}
    assert len(base_sparsity(np.ones((3, 3)))) == 9
    f = sym_matrix(3, [(0, 2, 1.0)])
    assert base_sparsity(f).indices == {(0, 2), (2, 0), (0, 0), (1, 1), (2, 2)}
    assert base_sparsity(f).is_symmetric()


def test_base_sparsity_tolerance():
    f = sym_matrix(3, [(0, 1, 1e-14), (1, 2, 1e-3)])
    assert (0, 1) not in base_sparsity(f) and (1, 2) in base_sparsity(f)


def test_extend_no_touch():
    theta = SparsityPattern.from_pairs(4, [(0, 0), (1, 1)])
    c = sym_matrix(4, [(2, 3, 1.0)])
    ext, ids = extend_sparsity(theta, [c])
    assert ext == theta and len(ids) == 0


def test_extend_links_diagonals():
    theta = SparsityPattern.from_pairs(4, [(0, 0)])
    c = np.diag([1.0, 0, 0, -1.0])
    ext, ids = extend_sparsity(theta, [c])
    assert (3, 3) in ext and list(ids) == [0]


def test_extend_single_step_on_chain():
    theta = SparsityPattern.from_pairs(5, [(0, 0)])
    chain = [np.diag([1.0, -1, 0, 0, 0]), np.diag([0, 1.0, -1, 0, 0]), np.diag([0, 0, 1.0, -1, 0])]
    ext, ids = extend_sparsity(theta, chain)
    assert list(ids) == [0]
    assert ext.indices == {(0, 0), (1, 1)}
    full = effective_sparsity(np.diag([1.0, 0, 0, 0, 0]), chain)
    assert {(i, i) for i in range(4)} <= full.indices


def test_components_seven_vertex_graph():
    # 1-based edges of the example graph, shifted to 0-based
    edges = [(5, 2), (2, 7), (7, 3), (5, 3), (1, 6)]
    pairs = [(i - 1, j - 1) for i, j in edges] + [(j - 1, i - 1) for i, j in edges]
    pairs += [(i, i) for i in range(7)]
    pattern, blocks, order = complete_components(SparsityPattern.from_pairs(7, pairs))
    comps = {frozenset(int(x) + 1 for x in b) for b in blocks}
    assert comps == {frozenset({5, 2, 7, 3}), frozenset({4}), frozenset({1, 6})}
    assert sorted(len(b) for b in blocks) == [1, 2, 4]
    assert len(pattern) == 16 + 1 + 4
    assert sorted(order) == list(range(7))


def test_components_trivial_cases():
    diag = SparsityPattern.from_pairs(5, [(i, i) for i in range(5)])
    pattern, blocks, order = complete_components(diag)
    assert pattern == diag and len(blocks) == 5 and list(order) == list(range(5))
    full = SparsityPattern.from_pairs(3, [(i, j) for i in range(3) for j in range(3)])
    assert complete_components(full)[0] == full


# --- fixed point vs brute force ----------------------------------------------------------

def brute_force_closure(f, constraints):
    n = f.shape[0]
    theta = {(i, i) for i in range(n)} | {(i, j) for i, j in zip(*np.nonzero(f))}
    supports = [set(zip(*np.nonzero(c))) for c in constraints]
    while True:
        new = set(theta)
        for s in supports:
            if s & theta:
                new |= s
        # complete connected components
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x
        for i, j in new:
            parent[find(i)] = find(j)
        groups = {}
        for v in range(n):
            groups.setdefault(find(v), []).append(v)
        new = {(i, j) for g in groups.values() for i in g for j in g}
        if new == theta:
            return theta
        theta = new


@pytest.mark.parametrize("trial", range(25))
def test_fixed_point_matches_brute_force(trial):
    rng = np.random.default_rng(100 + trial)
    n = int(rng.integers(4, 13))
    f = np.zeros((n, n))
    i, j = rng.integers(0, n, 2)
    f[i, j] = f[j, i] = 1.0
    constraints = []
    for _ in range(int(rng.integers(1, 8))):
        c = np.zeros((n, n))
        for _ in range(int(rng.integers(1, 3))):
            a, b = rng.integers(0, n, 2)
            c[a, b] = c[b, a] = rng.standard_normal()
        constraints.append(c)
    got = effective_sparsity(f, constraints)
    assert got.indices == brute_force_closure(f, constraints)
    # stable under one more pass
    ext, _ = extend_sparsity(got, constraints)
    assert complete_components(ext)[0] == got


def test_cascade_needs_second_iteration():
    # objective touches (0,1); constraint A links (1,1) with (2,3); after completion
    # {2,3} becomes a block and constraint B, touching (3,3), pulls in (4,4)
    f = sym_matrix(5, [(0, 1, 1.0)])
    a = sym_matrix(5, [(1, 1, 1.0), (2, 3, 1.0)])
    b = sym_matrix(5, [(3, 3, 1.0), (4, 4, -1.0)])
    c = sym_matrix(5, [(2, 4, 1.0)])
    got = effective_sparsity(f, [a, b, c])
    assert got.iterations >= 2
    assert got.indices == brute_force_closure(f, [a, b, c])


# --- reductions -------------------------------------------------------------------------

def test_discarded_constraints_disjoint_and_exact():
    spec = RelaxationSpec(projective_protocol(1, 2), seq("001"), 4)
    prob = build_relaxation(spec)
    red = reduce_problem(prob)
    assert red.exact
    assert sum(len(b) for b in red.blocks) == prob.n
    assert sorted(red.permutation[red.order]) == list(range(prob.n))
    theta = effective_sparsity(prob.objective, prob)
    for k in red.discarded_constraints[:200]:
        cols = prob.constraints.getrow(k).indices.astype(np.int64)
        assert not np.any(theta.contains(cols))
    assert np.all(prob.rhs[red.discarded_constraints] == 0)
    json.loads(red.to_json())


def test_lift_reproduces_objective():
    spec = RelaxationSpec(projective_protocol(1, 2), seq("001"), 3)
    prob = build_relaxation(spec)
    red = reduce_problem(prob)
    res = solve(red.reduced)
    blocks = res.solution
    full = red.lift(blocks)
    obj, residual = prob.evaluate(full)
    assert abs(obj - res.value) < 1e-9
    assert np.max(np.abs(residual)) < 1e-6
    assert np.min(np.linalg.eigvalsh(full)) > -1e-6


def test_inexact_when_inhomogeneous_dropped():
    # Y_12 + Y_21 = 1 never meets the pattern, and its rhs is non-zero
    f = np.diag([1.0, 0, 0])
    off = sym_matrix(3, [(1, 2, 0.5)])
    rows = sp.csr_matrix(np.vstack([np.diag([1.0, 0, 0]).ravel(), off.ravel()]))
    prob = SdpProblem((3,), sp.csr_matrix(f), rows, [0.5, 1.0])
    red = reduce_problem(prob)
    assert not red.exact
    assert list(red.kept_constraints) == [0]
    assert list(red.discarded_constraints) == [1]
    # dropping constraints can only relax: the reduced optimum is an upper bound
    assert solve(red.reduced).value >= solve(prob).value - 1e-7


def test_no_reduction_raises():
    f = np.ones((3, 3))
    prob = SdpProblem((3,), sp.csr_matrix(f), sp.csr_matrix(np.eye(3).reshape(1, 9)), [1.0])
    with pytest.raises(NoReduction):
        reduce_problem(prob)
    assert reduce_problem(prob, allow_full=True).num_variables == 9


@pytest.mark.parametrize("protocol,text,N", [
    (projective_protocol(1, 2), "01", 2),
    (projective_protocol(1, 2), "01", 3),
    (projective_protocol(1, 2), "001", 3),
    (projective_protocol(1, 2), "001", 4),
    (projective_protocol(1, 2), "0011", 4),
    (noisy_protocol(1), "01", 2),
    (noisy_protocol(2), "01", 2),
])
def test_sparse_matches_dense(protocol, text, N):
    prob = build_relaxation(RelaxationSpec(protocol, seq(text), N))
    dense = solve(prob)
    red = reduce_problem(prob)
    assert red.exact
    sparse = solve(red.reduced)
    assert dense.ok and sparse.ok
    assert abs(dense.value - sparse.value) < 1e-5


def test_lazy_source_matches_explicit():
    spec = RelaxationSpec(projective_protocol(2, 2), seq("001"), 3)
    prob = build_relaxation(spec)
    explicit = reduce_problem(prob, build=False)
    lazy = reduce_problem(objective=symmetric_objective(spec),
                          source=SymmetricConstraints(4, 3), build=False)
    assert [list(b) for b in explicit.blocks] == [list(b) for b in lazy.blocks]
    assert explicit.num_variables == lazy.num_variables == 3566
    assert lazy.expanded_constraints == 2809
    assert lazy.exact and explicit.exact
    assert explicit.iterations == lazy.iterations <= 4


def test_reduced_value_reference():
    spec = RelaxationSpec(projective_protocol(2, 2), seq("001"), 3)
    red = reduce_problem(objective=symmetric_objective(spec), source=SymmetricConstraints(4, 3),
                         meta={"trace_bound": 1.0})
    res = solve(red.reduced, SolverConfig())
    assert res.ok
    assert abs(res.value - 0.683477) < 5e-3
