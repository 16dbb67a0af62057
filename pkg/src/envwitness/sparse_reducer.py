"""Effective-sparsity reduction of a single-block SDP into a block-diagonal one.

Starting from the support of the objective plus the diagonal, the index set
is repeatedly (1) extended by the supports of every constraint that touches
it and (2) completed so that each connected component of the index graph
becomes a full block.  At the fixed point the variable can be restricted to
those blocks.  Dropping the untouched constraints is exact whenever all of
them are homogeneous (``b_k = 0``): zero-padding a reduced solution then
satisfies them trivially.

Patterns are stored as sorted arrays of flat codes ``i * n + j``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import NoReduction
from .sdp_model import SdpProblem

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class SparsityPattern:
    dim: int
    codes: np.ndarray
    iterations: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "codes", np.unique(np.asarray(self.codes, dtype=np.int64)))

    @classmethod
    def from_pairs(cls, dim: int, pairs) -> "SparsityPattern":
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls(dim, pairs[:, 0] * dim + pairs[:, 1])

    @property
    def indices(self) -> set[tuple[int, int]]:
        return {(int(c // self.dim), int(c % self.dim)) for c in self.codes}

    @property
    def rows(self) -> np.ndarray:
        return self.codes // self.dim

    @property
    def cols(self) -> np.ndarray:
        return self.codes % self.dim

    def __len__(self) -> int:
        return len(self.codes)

    def __contains__(self, pair) -> bool:
        i, j = pair
        return bool(self.contains(np.array([i * self.dim + j]))[0])

    def contains(self, codes: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, max(len(self.codes) - 1, 0))
        return (self.codes[pos] == codes) if len(self.codes) else np.zeros(len(codes), bool)

    def union(self, codes: np.ndarray) -> "SparsityPattern":
        return SparsityPattern(self.dim, np.concatenate([self.codes, codes]))

    def is_symmetric(self) -> bool:
        return bool(np.all(self.contains(self.cols * self.dim + self.rows)))

    def is_full(self) -> bool:
        return len(self.codes) == self.dim * self.dim

    def __eq__(self, other):
        return (isinstance(other, SparsityPattern) and self.dim == other.dim
                and np.array_equal(self.codes, other.codes))

    __hash__ = None


class ConstraintSource:
    """Read access to constraint rows, possibly generated on demand.

    ``candidates(codes)`` must return a superset of the ids of constraints
    whose support contains any of ``codes``; ``rows(ids)`` returns the
    actual data as a ``len(ids) x n^2`` sparse matrix.
    """

    n: int
    total: int

    def candidates(self, codes: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rows(self, ids: np.ndarray) -> sp.csr_matrix:
        raise NotImplementedError

    def rhs(self, ids: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inhomogeneous(self) -> np.ndarray:
        """Ids of constraints with non-zero right-hand side."""
        raise NotImplementedError

    def multiplicity(self, ids: np.ndarray) -> np.ndarray:
        """How many raw (pre de-duplication) equations each stored row stands for."""
        return np.ones(len(ids), dtype=np.int64)


class ExplicitSource(ConstraintSource):
    def __init__(self, constraints: sp.spmatrix, rhs: np.ndarray, n: int):
        self.n = n
        self._csr = sp.csr_matrix(constraints, copy=True)
        self._csr.eliminate_zeros()
        self._csc = self._csr.tocsc()
        self._rhs = np.asarray(rhs, dtype=float)
        self.total = self._csr.shape[0]

    @classmethod
    def of(cls, problem: SdpProblem) -> "ExplicitSource":
        return cls(problem.constraints, problem.rhs, problem.n)

    def candidates(self, codes):
        sub = self._csc[:, np.asarray(codes, dtype=np.int64)]
        return np.unique(sub.indices).astype(np.int64)

    def rows(self, ids):
        return self._csr[np.asarray(ids, dtype=np.int64)]

    def rhs(self, ids):
        return self._rhs[np.asarray(ids, dtype=np.int64)]

    def inhomogeneous(self):
        return np.flatnonzero(np.abs(self._rhs) > 0).astype(np.int64)


def _as_source(constraints, n: int) -> ConstraintSource:
    if isinstance(constraints, ConstraintSource):
        return constraints
    if isinstance(constraints, SdpProblem):
        return ExplicitSource.of(constraints)
    if sp.issparse(constraints):
        return ExplicitSource(constraints, np.zeros(constraints.shape[0]), n)
    # list of square matrices
    mats = [sp.coo_matrix(c) for c in constraints]
    rows = [np.full(m.nnz, k) for k, m in enumerate(mats)]
    cols = [m.row.astype(np.int64) * n + m.col for m in mats]
    vals = [m.data for m in mats]
    a = sp.csr_matrix((np.concatenate(vals) if vals else [],
                       (np.concatenate(rows) if rows else [], np.concatenate(cols) if cols else [])),
                      shape=(len(mats), n * n))
    return ExplicitSource(a, np.zeros(len(mats)), n)


def base_sparsity(F, zero_tol: float = ZERO_TOL) -> SparsityPattern:
    """Support of ``F`` together with the full diagonal."""
    f = sp.coo_matrix(F)
    n = f.shape[0]
    keep = np.abs(f.data) > zero_tol
    r, c = f.row[keep].astype(np.int64), f.col[keep].astype(np.int64)
    diag = np.arange(n, dtype=np.int64)
    codes = np.concatenate([r * n + c, c * n + r, diag * n + diag])
    return SparsityPattern(n, codes)


def _touching(theta: SparsityPattern, frontier: np.ndarray, source: ConstraintSource,
              known: np.ndarray, zero_tol: float):
    """Constraints not in ``known`` whose support meets ``theta`` via ``frontier``."""
    cand = source.candidates(frontier)
    cand = cand[~np.isin(cand, known)]
    if len(cand) == 0:
        return cand, np.zeros(0, dtype=np.int64)
    rows = sp.coo_matrix(source.rows(cand))
    nz = np.abs(rows.data) > zero_tol
    r, codes = rows.row[nz], rows.col[nz].astype(np.int64)
    hit = np.zeros(len(cand), dtype=bool)
    hit[r[theta.contains(codes)]] = True
    return cand[hit], codes[hit[r]]


def extend_sparsity(theta: SparsityPattern, constraints, zero_tol: float = ZERO_TOL):
    """One extension step: merge the supports of all constraints touching ``theta``."""
    source = _as_source(constraints, theta.dim)
    ids, codes = _touching(theta, theta.codes, source, np.zeros(0, np.int64), zero_tol)
    return theta.union(codes), ids


def complete_components(theta: SparsityPattern):
    """Fill every connected component of the index graph into a full block.

    Returns the completed pattern, the blocks (ascending member lists,
    ordered by smallest member) and the concatenated index order.
    """
    n = theta.dim
    graph = sp.coo_matrix((np.ones(len(theta)), (theta.rows, theta.cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # relabel by first appearance so that blocks are ordered by smallest member
    _, first = np.unique(labels, return_index=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    labels = rank[labels]
    order = np.argsort(labels, kind="stable")
    sizes = np.bincount(labels)
    blocks = np.split(order, np.cumsum(sizes)[:-1])
    codes = [np.add.outer(b * n, b).ravel() for b in blocks]
    return SparsityPattern(n, np.concatenate(codes)), blocks, order


@dataclass
class _FixedPoint:
    pattern: SparsityPattern
    blocks: list
    order: np.ndarray
    kept: np.ndarray
    iterations: int


def _fixed_point(F, source: ConstraintSource, zero_tol: float) -> _FixedPoint:
    theta = base_sparsity(F, zero_tol)
    kept = np.zeros(0, dtype=np.int64)
    frontier = theta.codes
    iterations = 0
    while True:
        iterations += 1
        ids, codes = _touching(theta, frontier, source, kept, zero_tol)
        kept = np.union1d(kept, ids)
        extended = theta.union(codes)
        completed, blocks, order = complete_components(extended)
        if completed == theta:
            return _FixedPoint(SparsityPattern(theta.dim, theta.codes, iterations),
                               blocks, order, kept, iterations)
        frontier = np.setdiff1d(completed.codes, theta.codes, assume_unique=True)
        theta = completed


def effective_sparsity(F, constraints, zero_tol: float = ZERO_TOL) -> SparsityPattern:
    """Fixed point of extend-then-complete from the base sparsity; ``.iterations`` records the passes."""
    n = sp.csr_matrix(F).shape[0]
    return _fixed_point(F, _as_source(constraints, n), zero_tol).pattern


@dataclass
class ReductionResult:
    reduced: SdpProblem | None
    permutation: np.ndarray  # original index -> block-ordered index
    order: np.ndarray        # block-ordered index -> original index
    blocks: list
    kept_constraints: np.ndarray
    discarded_count: int
    exact: bool
    iterations: int

    @property
    def num_variables(self) -> int:
        return sum(len(b) ** 2 for b in self.blocks)

    @property
    def num_constraints(self) -> int:
        return len(self.kept_constraints)

    total_constraints: int = 0
    expanded_constraints: int = 0

    @property
    def discarded_constraints(self) -> np.ndarray:
        """Ids of the dropped constraints (ids run over ``range(total)``)."""
        return np.setdiff1d(np.arange(self.total_constraints), self.kept_constraints)

    def report(self) -> dict:
        hist = Counter(len(b) for b in self.blocks)
        return {
            "iterations": self.iterations,
            "block_size_histogram": {str(k): v for k, v in sorted(hist.items())},
            "kept_variables": self.num_variables,
            "kept_constraints": self.num_constraints,
            "kept_constraints_expanded": self.expanded_constraints,
            "discarded_constraints": self.discarded_count,
            "exact": self.exact,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.report(), **kw)

    def lift(self, blocks_values: list[np.ndarray]) -> np.ndarray:
        """Zero-padded full matrix from reduced block values."""
        n = len(self.permutation)
        full = np.zeros((n, n), dtype=np.result_type(*blocks_values) if blocks_values else float)
        for idx, val in zip(self.blocks, blocks_values):
            full[np.ix_(idx, idx)] = val
        return full


def reduce_problem(problem: SdpProblem | None = None, zero_tol: float = ZERO_TOL, *,
                   objective=None, source: ConstraintSource | None = None,
                   build: bool = True, allow_full: bool = False,
                   meta: dict | None = None) -> ReductionResult:
    """Restrict a single-block problem to its effective sparsity.

    Either pass an explicit ``problem`` or an ``objective`` together with
    a (possibly lazy) constraint ``source``.  With ``build=False`` only the
    index sets and counts are computed.
    """
    if problem is not None:
        if len(problem.block_sizes) != 1:
            raise ValueError("reduce_problem expects a single PSD block")
        objective = problem.objective
        source = ExplicitSource.of(problem)
        meta = dict(problem.meta) if meta is None else meta
    if objective is None or source is None:
        raise ValueError("need a problem, or an objective and a constraint source")
    n = source.n
    fp = _fixed_point(objective, source, zero_tol)
    if fp.pattern.is_full() and not allow_full:
        raise NoReduction("effective sparsity covers the whole matrix")

    inhom = source.inhomogeneous()
    exact = bool(np.all(np.isin(inhom, fp.kept)))
    permutation = np.empty(n, dtype=np.int64)
    permutation[fp.order] = np.arange(n)

    reduced = None
    if build:
        f = sp.coo_matrix(objective)
        fr = sp.csr_matrix((f.data, (permutation[f.row], permutation[f.col])), shape=(n, n))
        rows = sp.coo_matrix(source.rows(fp.kept))
        i, j = rows.col // n, rows.col % n
        if not np.all(fp.pattern.contains(rows.col.astype(np.int64))):
            raise AssertionError("kept constraint leaves the effective sparsity")
        cols = permutation[i] * n + permutation[j]
        a = sp.csr_matrix((rows.data, (rows.row, cols)), shape=(len(fp.kept), n * n))
        new_meta = dict(meta or {})
        new_meta["reduction"] = {"iterations": fp.iterations, "exact": exact}
        reduced = SdpProblem(tuple(len(b) for b in fp.blocks), fr, a,
                             source.rhs(fp.kept), new_meta)
    return ReductionResult(reduced, permutation, fp.order, fp.blocks, fp.kept,
                           source.total - len(fp.kept), exact, fp.iterations, source.total,
                           int(source.multiplicity(fp.kept).sum()))
