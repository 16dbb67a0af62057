"""Level-N symmetric-extension relaxation of the sequence-probability maximum.

The variable ``Phi`` lives on ``N`` copies of the local space ``A = I (x) O``
(dimension ``d = d_ES^2``).  It is constrained to be a normalised state,
supported on the symmetric subspace, and to satisfy the causality
condition ``Tr_O1[Phi] = 1_I1 / d_ES (x) Tr_A1[Phi]``.  The objective is
``Tr[(X^T (x) 1) Phi]``.

Two encodings are available:

* ``symmetric``: ``Phi = V^dagger phi V`` with ``phi`` indexed by types,
  so the symmetry holds by construction.  The partial-trace condition
  becomes one equation per quadruple ``(i, s, i', s')``::

      sum_o phi_hat[s + e(i,o), s' + e(i',o)]
          - delta_ii' / d_ES * sum_u phi_hat[s + e_u, s' + e_u] = 0,

  with ``phi_hat[t, t'] = phi[t, t'] / sqrt((t)(t'))``.
* ``full_space``: ``Phi`` on the whole tensor space with explicit
  symmetry equations, optionally with PPT blocks ``Phi^{T_k}`` for the
  first-``k``-copies bipartitions, ``k = 1..N//2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, IntractableSize
from .quantum_core import (MeasurementProtocol, ObjectiveOperator, OutcomeSequence,
                           build_objective, choi_of_unitary)
from .sdp_model import REAL_TOL, SdpProblem
from .sparse_reducer import ConstraintSource
from .symmetric_subspace import (add_unit_table, enumerate_types, project_objective,
                                 remove_unit_table, symmetric_power_coordinates)

DEFAULT_BUDGET = 20_000_000  # scalar entries of the SDP variable


class Representation(str, enum.Enum):
    SYMMETRIC = "symmetric"
    FULL_SPACE = "full_space"


@dataclass(frozen=True)
class RelaxationSpec:
    protocol: MeasurementProtocol
    seq: OutcomeSequence
    N: int
    ppt: bool = False
    representation: Representation = Representation.SYMMETRIC
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "representation", Representation(self.representation))
        if self.N < self.seq.L:
            raise DimensionMismatch(f"N={self.N} must be at least L={self.seq.L}")
        if self.ppt and self.representation is not Representation.FULL_SPACE:
            raise ValueError("PPT constraints need the full_space representation")

    @property
    def d_ES(self) -> int:
        return self.protocol.d_ES


def definetti_error_bound(L: int, d_ES: int, N: int) -> float:
    """Trace-norm gap ``2 L (L + d_ES^2 + 1) / (N + d_ES^2)`` of the level-N relaxation.

    A tighter-looking variant with denominator ``N + d_ES`` and no factor 2 is
    sometimes quoted; this is the conservative form.
    """
    if not 1 <= L <= N:
        raise ValueError("need 1 <= L <= N")
    d2 = d_ES * d_ES
    return float(Fraction(2 * L * (L + d2 + 1), N + d2))


# ---------------------------------------------------------------------------
# realification

def _chop(a: sp.csr_matrix, tol: float = 1e-13) -> sp.csr_matrix:
    """Remove cancellation residue left by summing duplicate entries."""
    a.sum_duplicates()
    a.data[np.abs(a.data) < tol] = 0
    a.eliminate_zeros()
    return a


def _split_rows(a: sp.csr_matrix):
    # copies: eliminate_zeros below must not touch the caller's index arrays
    re = sp.csr_matrix(a.real if np.iscomplexobj(a.data) else a, copy=True)
    im = sp.csr_matrix(a.imag, copy=True) if np.iscomplexobj(a.data) else sp.csr_matrix(a.shape)
    re.eliminate_zeros()
    im.eliminate_zeros()
    return re, im


def _row_max(a: sp.csr_matrix) -> np.ndarray:
    b = abs(a).tocsr()
    return b.max(axis=1).toarray().ravel() if b.nnz else np.zeros(a.shape[0])


def realify(problem: SdpProblem, mode: str = "auto") -> SdpProblem:
    """Real symmetric version of a Hermitian problem.

    Mode ``"a"`` keeps the real parts and drops purely imaginary rows.  It
    is exact when the objective is real and every row is either real or
    purely imaginary with zero right-hand side: the feasible set is then
    closed under complex conjugation, so the real part of an optimal point
    is optimal.  Mode ``"b"`` uses the embedding
    ``Y -> [[Re Y, -Im Y], [Im Y, Re Y]]`` with data ``A -> 1/2 [[Re A, Im A], [-Im A, Re A]]``.
    ``"auto"`` picks ``"a"`` whenever it is exact.
    """
    f = problem.objective
    a = problem.constraints.tocsr()
    f_im = np.max(np.abs(f.data.imag), initial=0.0) if np.iscomplexobj(f.data) else 0.0
    re, im = _split_rows(a)
    re_max, im_max = _row_max(re), _row_max(im)
    mixed = (re_max > REAL_TOL) & (im_max > REAL_TOL)
    imag_rows = (re_max <= REAL_TOL) & (im_max > REAL_TOL)
    can_drop = f_im <= REAL_TOL and not mixed.any() and np.all(problem.rhs[imag_rows] == 0)
    if mode == "auto":
        mode = "a" if can_drop else "b"
    meta = dict(problem.meta)
    if mode == "a":
        if not can_drop:
            raise ValueError("mode (a) would change the problem; use mode (b)")
        keep = ~imag_rows
        meta["realify"] = "a"
        return SdpProblem(problem.block_sizes, sp.csr_matrix(f.real), re[np.flatnonzero(keep)],
                          problem.rhs[keep], meta)
    if mode != "b":
        raise ValueError(f"unknown realify mode {mode!r}")
    n = problem.n
    offsets = problem.block_offsets
    block = problem.block_of()
    local = np.arange(n) - offsets[block]
    sizes = np.asarray(problem.block_sizes)
    real_idx = 2 * offsets[block] + local
    imag_idx = real_idx + sizes[block]
    n2 = 2 * n

    def embed(mat_rows, mat_cols, vals):
        """Entries of 1/2 [[Re, Im], [-Im, Re]] for entries (i, j, v)."""
        ri, ii = real_idx[mat_rows], imag_idx[mat_rows]
        rj, ij = real_idx[mat_cols], imag_idx[mat_cols]
        re_v, im_v = 0.5 * np.real(vals), 0.5 * np.imag(vals)
        rows = np.concatenate([ri, ii, ri, ii])
        cols = np.concatenate([rj, ij, ij, rj])
        data = np.concatenate([re_v, re_v, im_v, -im_v])
        return rows, cols, data

    fc = f.tocoo()
    r, c, v = embed(fc.row, fc.col, fc.data)
    f2 = sp.csr_matrix((v, (r, c)), shape=(n2, n2))
    ac = a.tocoo()
    r, c, v = embed(ac.col // n, ac.col % n, ac.data)
    k = np.tile(ac.row, 4)
    a2 = sp.csr_matrix((v, (k, r.astype(np.int64) * n2 + c)), shape=(problem.m, n2 * n2))
    a2.eliminate_zeros()
    meta["realify"] = "b"
    if "trace_bound" in meta:
        meta["trace_bound"] = 2 * meta["trace_bound"]
    return SdpProblem(tuple(2 * s for s in problem.block_sizes), f2, a2, problem.rhs, meta)


# ---------------------------------------------------------------------------
# symmetric representation

class SymmetricConstraints(ConstraintSource):
    """Partial-trace equations of the symmetric encoding, generated on demand.

    Constraint ids: ``0`` is the trace row; quadruple rows follow, one per
    canonical pair ``(a, b)`` with ``a = i * S + idx(s) <= b = i' * S + idx(s')``
    (``S = |T^{N-1}|``), numbered in row-major upper-triangular order.  The
    conjugate quadruple gives the transposed coefficient matrix and is
    therefore skipped.  Rows are returned either Hermitian (``part="herm"``,
    real part then imaginary part per quadruple) or real (``part="real"``,
    symmetric part only).
    """

    def __init__(self, d_ES: int, N: int):
        if N < 1:
            raise ValueError("N must be positive")
        self.d_ES = d_ES
        self.N = N
        self.d = d_ES * d_ES
        self.space = enumerate_types(self.d, N)
        self.lower = enumerate_types(self.d, N - 1)
        self.n = len(self.space)
        self.S = len(self.lower)
        self.M = d_ES * self.S
        self.total = self.M * (self.M + 1) // 2 + 1
        self.raw_count = self.M * self.M + 1
        self._add = add_unit_table(self.d, N - 1)
        self._remove = remove_unit_table(self.d, N)
        self._isqrt = 1.0 / np.sqrt(self.space.multinomials())

    # id <-> canonical pair
    def _pair_id(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        M = self.M
        return 1 + a * M - a * (a - 1) // 2 + (b - a)

    def _id_pair(self, ids):
        q = np.asarray(ids, dtype=np.int64) - 1
        M = self.M
        # a = largest with a*M - a(a-1)/2 <= q
        start = lambda a: a * M - a * (a - 1) // 2
        disc = (2 * M + 1) ** 2 - 8 * q
        a = np.floor(((2 * M + 1) - np.sqrt(disc.astype(float))) / 2).astype(np.int64)
        a = np.clip(a, 0, M - 1)
        a = np.where(start(a) > q, a - 1, a)
        a = np.where(start(a + 1) <= q, a + 1, a)
        return a, a + (q - start(a))

    def coefficient_entries(self, ids):
        """Raw (non-symmetrised) coefficients ``c_q``: (local row, t, t', value)."""
        ids = np.asarray(ids, dtype=np.int64)
        d_ES, S = self.d_ES, self.S
        is_trace = ids == 0
        quad = np.flatnonzero(~is_trace)
        a, b = self._id_pair(ids[quad])
        i, s = a // S, a % S
        i2, s2 = b // S, b % S
        rows, ts, tps, vals = [], [], [], []
        for o in range(d_ES):
            t = self._add[s, i * d_ES + o]
            tp = self._add[s2, i2 * d_ES + o]
            rows.append(quad)
            ts.append(t)
            tps.append(tp)
            vals.append(self._isqrt[t] * self._isqrt[tp])
        diag = np.flatnonzero(i == i2)
        for u in range(self.d):
            t = self._add[s[diag], u]
            tp = self._add[s2[diag], u]
            rows.append(quad[diag])
            ts.append(t)
            tps.append(tp)
            vals.append(-self._isqrt[t] * self._isqrt[tp] / d_ES)
        for k in np.flatnonzero(is_trace):
            idx = np.arange(self.n)
            rows.append(np.full(self.n, k))
            ts.append(idx)
            tps.append(idx)
            vals.append(np.ones(self.n))
        return tuple(np.concatenate(x) for x in (rows, ts, tps, vals))

    def rows(self, ids, part: str = "real") -> sp.csr_matrix:
        ids = np.asarray(ids, dtype=np.int64)
        r, t, tp, v = self.coefficient_entries(ids)
        n = self.n
        rows = np.concatenate([r, r])
        cols = np.concatenate([t * n + tp, tp * n + t])
        sym = _chop(sp.csr_matrix((np.concatenate([v, v]) / 2, (rows, cols)), shape=(len(ids), n * n)))
        if part == "real":
            return sym
        anti = _chop(sp.csr_matrix((np.concatenate([v, -v]) * (-0.5j), (rows, cols)),
                                   shape=(len(ids), n * n)))
        # interleave real and imaginary rows: 2k, 2k + 1
        out = sp.vstack([sym, anti]).tocsr()
        perm = np.empty(2 * len(ids), dtype=np.int64)
        perm[0::2] = np.arange(len(ids))
        perm[1::2] = len(ids) + np.arange(len(ids))
        return out[perm]

    def rhs(self, ids):
        return (np.asarray(ids) == 0).astype(float)

    def inhomogeneous(self):
        return np.array([0], dtype=np.int64)

    def multiplicity(self, ids):
        """Off-diagonal quadruples stand for themselves and their conjugate."""
        ids = np.asarray(ids, dtype=np.int64)
        out = np.ones(len(ids), dtype=np.int64)
        quad = ids > 0
        a, b = self._id_pair(ids[quad])
        out[quad] = np.where(a == b, 1, 2)
        return out

    def candidates(self, codes):
        """Quadruples whose raw or transposed coefficients may hit the entries."""
        codes = np.asarray(codes, dtype=np.int64)
        n, d_ES, S = self.n, self.d_ES, self.S
        t, tp = codes // n, codes % n
        t, tp = np.concatenate([t, tp]), np.concatenate([tp, t])
        found = [np.zeros(1, dtype=np.int64)] if np.any(t == tp) else []
        for u in range(self.d):
            s = self._remove[t, u]
            has = s >= 0
            i, o = divmod(u, d_ES)
            for i2 in range(d_ES):
                s2 = self._remove[tp, i2 * d_ES + o]
                ok = has & (s2 >= 0)
                found.append(self._canonical(i * S + s[ok], i2 * S + s2[ok]))
            # the trace-of-A1 part, any i
            s2 = self._remove[tp, u]
            ok = has & (s2 >= 0)
            for ii in range(d_ES):
                found.append(self._canonical(ii * S + s[ok], ii * S + s2[ok]))
        return np.unique(np.concatenate(found)) if found else np.zeros(0, np.int64)

    def _canonical(self, a, b):
        return self._pair_id(np.minimum(a, b), np.maximum(a, b))


def _symmetric_problem(spec: RelaxationSpec, X: ObjectiveOperator) -> SdpProblem:
    d = spec.d_ES ** 2
    dim = math.comb(spec.N + d - 1, spec.N)
    if dim * dim > spec.budget:
        raise IntractableSize(f"symmetric variable {dim}x{dim} exceeds budget {spec.budget}")
    x = project_objective(X, spec.N)
    source = SymmetricConstraints(spec.d_ES, spec.N)
    ids = np.arange(source.total, dtype=np.int64)
    herm = source.rows(ids, part="herm")
    # the trace row appears twice (real, zero imaginary); drop empty rows
    nonempty = np.diff(herm.indptr) > 0
    rhs = np.repeat(source.rhs(ids), 2)
    meta = {
        "representation": "symmetric",
        "N": spec.N,
        "L": spec.seq.L,
        "d_ES": spec.d_ES,
        "seq": str(spec.seq),
        "raw_constraint_count": source.raw_count,
        "canonical_constraint_count": source.total,
        "trace_bound": 1.0,
    }
    # <F, phi> = Tr[x phi] requires F = x^T
    return SdpProblem((dim,), sp.csr_matrix(x.T), herm[np.flatnonzero(nonempty)],
                      rhs[nonempty], meta)


def symmetric_feasible_point(u: np.ndarray, N: int) -> np.ndarray:
    """``phi = V C_U^{(x)N} V^dagger`` for the normalised Choi state of ``u``."""
    c = choi_of_unitary(u, normalized=True)
    d_ES = c.d_in
    omega = np.asarray(u, dtype=complex).T.reshape(-1) / math.sqrt(d_ES)
    w = symmetric_power_coordinates(omega, enumerate_types(d_ES * d_ES, N))
    return np.outer(w, w.conj())


# ---------------------------------------------------------------------------
# full tensor-space representation

def _hermitian_rows(rows, cols, vals, m: int, n: int, real_only: bool) -> sp.csr_matrix:
    """Split raw rows ``sum c_ij Y_ij = 0`` into Hermitian real/imaginary parts."""
    r2 = np.concatenate([rows, rows])
    c2 = np.concatenate([cols[0] * n + cols[1], cols[1] * n + cols[0]])
    sym = _chop(sp.csr_matrix((np.concatenate([vals, vals]) / 2, (r2, c2)), shape=(m, n * n)))
    if real_only:
        return sym
    anti = _chop(sp.csr_matrix((np.concatenate([vals, -vals]) * (-0.5j), (r2, c2)), shape=(m, n * n)))
    return sp.vstack([sym.astype(complex), anti]).tocsr()


def _dedupe(a: sp.csr_matrix, rhs: np.ndarray):
    """Drop empty rows and rows equal (up to sign, when homogeneous) to an earlier one."""
    a = sp.csr_matrix(a, copy=True)
    a.eliminate_zeros()
    a.sum_duplicates()
    a.sort_indices()
    seen = {}
    keep = []
    for k in range(a.shape[0]):
        lo, hi = a.indptr[k], a.indptr[k + 1]
        if lo == hi:
            continue
        idx = a.indices[lo:hi]
        val = np.round(a.data[lo:hi], 14)
        if rhs[k] == 0:
            lead = val[0]
            val = val / lead
        key = (idx.tobytes(), val.tobytes(), rhs[k])
        if key in seen:
            continue
        seen[key] = k
        keep.append(k)
    keep = np.array(keep, dtype=np.int64)
    return a[keep], rhs[keep]


def _full_space_problem(spec: RelaxationSpec, X: ObjectiveOperator) -> SdpProblem:
    d, N = spec.d_ES ** 2, spec.N
    D = d ** N
    n_ppt = N // 2 if spec.ppt else 0
    if D * D * (1 + n_ppt) > spec.budget:
        raise IntractableSize(
            f"full-space variable {D}x{D} (+{n_ppt} PPT blocks) exceeds budget {spec.budget}"
        )
    d_ES = spec.d_ES
    labels = np.indices((d,) * N).reshape(N, -1).T  # row k -> local labels, first copy most significant
    weights = d ** np.arange(N - 1, -1, -1)
    n_tot = D * (1 + n_ppt)

    raw_rows, raw_cols, raw_vals, rhs_list = [], [[], []], [], []
    count = 0

    def add(rows, r, c, v):
        raw_rows.append(rows)
        raw_cols[0].append(r)
        raw_cols[1].append(c)
        raw_vals.append(v)

    # trace
    add(np.zeros(D, dtype=np.int64), np.arange(D), np.arange(D), np.ones(D))
    rhs_list.append(np.ones(1))
    count = 1

    aa, bb = np.meshgrid(np.arange(D), np.arange(D), indexing="ij")
    aa, bb = aa.ravel(), bb.ravel()
    # symmetry: Phi[sigma a, b] = Phi[a, b] for transpositions (0 k)
    for k in range(1, N):
        swapped = labels.copy()
        swapped[:, [0, k]] = swapped[:, [k, 0]]
        sigma = swapped @ weights
        rows = count + np.arange(D * D)
        add(rows, sigma[aa], bb, np.ones(D * D))
        add(rows, aa, bb, -np.ones(D * D))
        rhs_list.append(np.zeros(D * D))
        count += D * D

    # partial trace: Tr_O1 Phi = 1/d_ES 1_I1 (x) Tr_A1 Phi
    rest = d ** (N - 1)
    w, wp = np.meshgrid(np.arange(rest), np.arange(rest), indexing="ij")
    w, wp = w.ravel(), wp.ravel()
    for i in range(d_ES):
        for i2 in range(d_ES):
            rows = count + np.arange(rest * rest)
            for o in range(d_ES):
                add(rows, (i * d_ES + o) * rest + w, (i2 * d_ES + o) * rest + wp,
                    np.ones(rest * rest))
            if i == i2:
                for u in range(d):
                    add(rows, u * rest + w, u * rest + wp, -np.ones(rest * rest) / d_ES)
            rhs_list.append(np.zeros(rest * rest))
            count += rest * rest

    # PPT: Y_k = Phi^{T_{first k copies}}
    for k in range(1, n_ppt + 1):
        off = k * D
        hi_a, lo_a = aa // d ** (N - k), aa % d ** (N - k)
        hi_b, lo_b = bb // d ** (N - k), bb % d ** (N - k)
        pa = hi_b * d ** (N - k) + lo_a
        pb = hi_a * d ** (N - k) + lo_b
        rows = count + np.arange(D * D)
        add(rows, off + aa, off + bb, np.ones(D * D))
        add(rows, pa, pb, -np.ones(D * D))
        rhs_list.append(np.zeros(D * D))
        count += D * D

    rows = np.concatenate(raw_rows)
    cols = (np.concatenate(raw_cols[0]), np.concatenate(raw_cols[1]))
    vals = np.concatenate(raw_vals)
    rhs = np.concatenate(rhs_list)
    a = _hermitian_rows(rows, cols, vals, count, n_tot, real_only=False)
    rhs = np.concatenate([rhs, np.zeros(count)])
    a, rhs = _dedupe(a, rhs)

    # objective Tr[(X^T (x) 1) Phi] = <X (x) 1, Phi>
    obj = sp.kron(X.matrix, sp.identity(d ** (N - X.L)), format="csr")
    obj = sp.block_diag([obj] + [sp.csr_matrix((D, D))] * n_ppt, format="csr")
    meta = {
        "representation": "full_space",
        "N": N,
        "L": spec.seq.L,
        "d_ES": d_ES,
        "seq": str(spec.seq),
        "ppt_blocks": n_ppt,
        "trace_bound": float(1 + n_ppt),
    }
    return SdpProblem((D,) * (1 + n_ppt), obj, a, rhs, meta)


def build_relaxation(spec: RelaxationSpec, realify_mode: str | None = "auto") -> SdpProblem:
    """Assemble the level-``N`` relaxation; realified unless ``realify_mode`` is None."""
    X = build_objective(spec.protocol, spec.seq)
    if spec.representation is Representation.SYMMETRIC:
        problem = _symmetric_problem(spec, X)
    else:
        problem = _full_space_problem(spec, X)
    if realify_mode is None:
        return problem
    return realify(problem, realify_mode)


def symmetric_objective(spec: RelaxationSpec) -> sp.csr_matrix:
    """Objective ``F`` of the symmetric encoding (for reductions without building rows)."""
    x = project_objective(build_objective(spec.protocol, spec.seq), spec.N)
    return sp.csr_matrix(x.T)
