"""Solver-neutral SDP data model, SDPA sparse interchange, and a conic-solver adapter.

Problems are stored in the form

    maximize    <F, Y>
    subject to  <A_k, Y> = b_k,   k = 1..m
                Y = diag(Y_1, ..., Y_r) positive semidefinite,

with the entrywise pairing ``<A, Y> = sum_ij A_ij Y_ij``.  For real
symmetric data this is ``Tr[A Y]``.  Constraint data are kept as one sparse
``m x n^2`` matrix whose row ``k`` is ``A_k`` flattened row-major.
"""

from __future__ import annotations

import enum
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ComplexNotRealified, SdpaFormatError, SolverUnavailable

HERMITIAN_TOL = 1e-12
REAL_TOL = 1e-12


@dataclass(frozen=True)
class SdpProblem:
    block_sizes: tuple[int, ...]
    objective: sp.csr_matrix
    constraints: sp.csr_matrix
    rhs: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)
    sense: str = "maximize"

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        object.__setattr__(self, "objective", sp.csr_matrix(self.objective))
        object.__setattr__(self, "constraints", sp.csr_matrix(self.constraints))
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float).reshape(-1))
        n = self.n
        if self.objective.shape != (n, n):
            raise ValueError(f"objective must be {n}x{n}, got {self.objective.shape}")
        if self.constraints.shape[1] != n * n:
            raise ValueError(f"constraint rows must have length {n * n}")
        if self.constraints.shape[0] != self.rhs.size:
            raise ValueError("constraints and rhs disagree on m")

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @property
    def m(self) -> int:
        return self.constraints.shape[0]

    @property
    def num_variables(self) -> int:
        """Scalar entries of the block-diagonal variable (sum of squared block sizes)."""
        return sum(b * b for b in self.block_sizes)

    @property
    def block_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(np.int64)

    def block_of(self) -> np.ndarray:
        """Block id of every row/column index."""
        return np.repeat(np.arange(len(self.block_sizes)), self.block_sizes)

    def is_real(self) -> bool:
        return _max_imag(self.objective) <= REAL_TOL and _max_imag(self.constraints) <= REAL_TOL

    def constraint(self, k: int) -> sp.csr_matrix:
        row = self.constraints.getrow(k).tocoo()
        n = self.n
        return sp.csr_matrix((row.data, (row.col // n, row.col % n)), shape=(n, n))

    def evaluate(self, y: np.ndarray) -> tuple[float, np.ndarray]:
        """Objective value and constraint residual ``A vec(Y) - b`` at a dense ``Y``."""
        flat = np.asarray(y).reshape(-1)
        obj = np.sum(self.objective.multiply(np.asarray(y)))
        res = self.constraints @ flat - self.rhs
        return float(np.real(obj)), res


def _max_imag(a) -> float:
    data = a.data if sp.issparse(a) else np.asarray(a)
    if not np.iscomplexobj(data) or data.size == 0:
        return 0.0
    return float(np.max(np.abs(data.imag)))


def conjugate_transpose_rows(constraints: sp.spmatrix, n: int) -> sp.csr_matrix:
    """Row-wise ``A_k -> A_k^dagger`` in the flattened layout."""
    coo = sp.coo_matrix(constraints)
    cols = (coo.col % n) * n + coo.col // n
    return sp.csr_matrix((np.conj(coo.data), (coo.row, cols)), shape=coo.shape)


def validate(problem: SdpProblem) -> list[str]:
    """Human-readable diagnostics; empty when the problem is well formed."""
    diags = []
    n = problem.n
    block = problem.block_of()

    f = problem.objective
    if f.nnz and abs(f - f.conj().T).max() > HERMITIAN_TOL:
        diags.append("objective: not Hermitian")
    fc = f.tocoo()
    bad = block[fc.row] != block[fc.col]
    if np.any(bad):
        diags.append(f"objective: entry ({fc.row[bad][0]}, {fc.col[bad][0]}) couples distinct blocks")

    a = problem.constraints
    if a.nnz:
        diff = (a - conjugate_transpose_rows(a, n)).tocsr()
        diff.data = np.abs(diff.data)
        diff.eliminate_zeros()
        worst = diff.max(axis=1).toarray().ravel() if diff.nnz else np.zeros(problem.m)
        for k in np.flatnonzero(worst > HERMITIAN_TOL):
            diags.append(f"constraint {k}: not Hermitian (max deviation {worst[k]:.3g})")
        coo = a.tocoo()
        straddle = block[coo.col // n] != block[coo.col % n]
        for k in np.unique(coo.row[straddle]):
            sel = straddle & (coo.row == k)
            i, j = coo.col[sel][0] // n, coo.col[sel][0] % n
            diags.append(f"constraint {k}: entry ({i}, {j}) straddles blocks "
                         f"{block[i]} and {block[j]}")
    if not np.all(np.isfinite(problem.rhs)):
        diags.append("rhs: non-finite entries")
    return diags


# ---------------------------------------------------------------------------
# SDPA sparse format

_SIGN_TAG = "envwitness-objective-sign"


def export_sdpa(problem: SdpProblem, destination, negate_objective: bool = False) -> None:
    """Write the problem as an SDPA sparse (``.dat-s``) file.

    SDPA's dual form is ``max F0 . Y`` s.t. ``F_k . Y = c_k``, which is
    exactly our form, so by default ``F0 = F`` and ``c = b``.  Some tools
    expect a minimization objective in the ``F0`` slot; ``negate_objective``
    writes ``-F`` instead and records the flip in a comment so that
    :func:`import_sdpa` can undo it.  Runs of 1x1 blocks are written as
    SDPA diagonal blocks (negative size).
    """
    if not problem.is_real():
        raise ComplexNotRealified("SDPA export needs real symmetric data; realify first")
    groups = _sdpa_groups(problem.block_sizes)
    sign = -1.0 if negate_objective else 1.0
    lines = [
        "* SDPA sparse format written by envwitness",
        "* dual form: maximize F0 . Y  subject to  F_k . Y = c_k,  Y psd",
        f"* {_SIGN_TAG} = {int(sign)}",
        str(problem.m),
        str(len(groups)),
        " ".join(str(-size if diag else size) for _, size, diag in groups),
        " ".join(repr(float(v)) for v in problem.rhs) if problem.m else "",
    ]
    # global index -> (group number, 1-based local index)
    gid = np.empty(problem.n, dtype=np.int64)
    loc = np.empty(problem.n, dtype=np.int64)
    for g, (start, size, _) in enumerate(groups):
        gid[start:start + size] = g + 1
        loc[start:start + size] = np.arange(1, size + 1)

    def emit(k, mat):
        coo = sp.coo_matrix(mat)
        keep = coo.row <= coo.col
        r, c, v = coo.row[keep], coo.col[keep], np.real(coo.data[keep])
        order = np.lexsort((c, r))
        for i, j, val in zip(r[order], c[order], v[order]):
            if val != 0.0:
                lines.append(f"{k} {gid[i]} {loc[i]} {loc[j]} {float(val)!r}")

    emit(0, sign * problem.objective)
    a = problem.constraints.tocsr()
    n = problem.n
    for k in range(problem.m):
        lo, hi = a.indptr[k], a.indptr[k + 1]
        cols, vals = a.indices[lo:hi], a.data[lo:hi]
        emit(k + 1, sp.coo_matrix((vals, (cols // n, cols % n)), shape=(n, n)))
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text)


def _sdpa_groups(block_sizes) -> list[tuple[int, int, bool]]:
    """(start, size, is_diagonal) for each SDPA block; 1x1 runs are merged."""
    groups = []
    start = 0
    for b in block_sizes:
        if b == 1 and groups and groups[-1][2] and groups[-1][0] + groups[-1][1] == start:
            s, size, _ = groups[-1]
            groups[-1] = (s, size + 1, True)
        else:
            groups.append((start, b, b == 1))
        start += b
    return groups


def _numbers(line: str) -> list[str]:
    for ch in ",(){}":
        line = line.replace(ch, " ")
    return line.split()


def import_sdpa(source) -> SdpProblem:
    """Parse an SDPA sparse file (as written by :func:`export_sdpa` or any SDPA tool)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    sign = 1.0
    body = []
    for raw in text.splitlines():
        s = raw.strip()
        if not s:
            continue
        if s[0] in '*"':
            if _SIGN_TAG in s:
                sign = float(s.split("=")[1])
            continue
        body.append(s)
    try:
        m = int(_numbers(body[0])[0])
        nblocks = int(_numbers(body[1])[0])
        struct = [int(float(x)) for x in _numbers(body[2])[:nblocks]]
        pos = 3
        rhs: list[float] = []
        while len(rhs) < m:
            rhs.extend(float(x) for x in _numbers(body[pos]))
            pos += 1
        rhs = rhs[:m]
    except (IndexError, ValueError) as exc:
        raise SdpaFormatError(f"malformed SDPA header: {exc}") from exc
    if len(struct) != nblocks:
        raise SdpaFormatError("block structure line is too short")

    block_sizes: list[int] = []
    starts = []
    for b in struct:
        starts.append(sum(block_sizes))
        block_sizes.extend([1] * (-b) if b < 0 else [b])
    n = sum(block_sizes)

    obj_r, obj_c, obj_v = [], [], []
    con_r, con_c, con_v = [], [], []
    for s in body[pos:]:
        parts = _numbers(s)
        if len(parts) < 5:
            raise SdpaFormatError(f"bad entry line: {s!r}")
        k, g, i, j = (int(p) for p in parts[:4])
        val = float(parts[4])
        if not (0 <= k <= m and 1 <= g <= nblocks):
            raise SdpaFormatError(f"index out of range in line {s!r}")
        if struct[g - 1] < 0 and i != j:
            raise SdpaFormatError(f"off-diagonal entry in diagonal block: {s!r}")
        gi, gj = starts[g - 1] + i - 1, starts[g - 1] + j - 1
        pairs = [(gi, gj)] if gi == gj else [(gi, gj), (gj, gi)]
        for a, b in pairs:
            if k == 0:
                obj_r.append(a)
                obj_c.append(b)
                obj_v.append(sign * val)
            else:
                con_r.append(k - 1)
                con_c.append(a * n + b)
                con_v.append(val)
    f = sp.csr_matrix((obj_v, (obj_r, obj_c)), shape=(n, n))
    a = sp.csr_matrix((con_v, (con_r, con_c)), shape=(m, n * n))
    return SdpProblem(tuple(block_sizes), f, a, np.array(rhs), {"source": "sdpa"})


# ---------------------------------------------------------------------------
# Results


class SolverStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    NEAR_OPTIMAL = "near_optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIMEOUT = "timeout"
    NUMERICAL_ERROR = "numerical_error"


@dataclass
class BoundResult:
    value: float | None
    safe_value: float | None
    N: int | None
    ppt: bool
    solver_status: SolverStatus
    primal_residual: float
    dual_residual: float
    gap: float
    wall_time: float
    raw_value: float | None = None
    dual_bound: float | None = None
    solver: str = ""
    extra: dict = field(default_factory=dict)
    solution: list | None = field(default=None, repr=False)
    dual: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.solver_status in (SolverStatus.OPTIMAL, SolverStatus.NEAR_OPTIMAL)

    def to_dict(self) -> dict:
        out = {
            "schema": "envwitness.bound/1",
            "value": self.value,
            "safe_value": self.safe_value,
            "raw_value": self.raw_value,
            "dual_bound": self.dual_bound,
            "N": self.N,
            "ppt": self.ppt,
            "status": self.solver_status.value,
            "residuals": {
                "primal": self.primal_residual,
                "dual": self.dual_residual,
                "gap": self.gap,
            },
            "wall_time_s": self.wall_time,
            "solver": self.solver,
        }
        out.update(self.extra)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=_json_default, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "BoundResult":
        known = {"schema", "value", "safe_value", "raw_value", "dual_bound", "N", "ppt",
                 "status", "residuals", "wall_time_s", "solver"}
        res = d.get("residuals", {})
        return cls(
            value=d.get("value"), safe_value=d.get("safe_value"), N=d.get("N"),
            ppt=bool(d.get("ppt", False)), solver_status=SolverStatus(d["status"]),
            primal_residual=res.get("primal", math.nan), dual_residual=res.get("dual", math.nan),
            gap=res.get("gap", math.nan), wall_time=d.get("wall_time_s", 0.0),
            raw_value=d.get("raw_value"), dual_bound=d.get("dual_bound"),
            solver=d.get("solver", ""), extra={k: v for k, v in d.items() if k not in known},
        )


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, enum.Enum):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o)}")


# ---------------------------------------------------------------------------
# Solver adapter

SOLVER_ENV = "ENVWITNESS_SOLVER"


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 200
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    time_limit: float | None = None
    solver: str | None = None  # "clarabel", "scs" or "auto"; falls back to $ENVWITNESS_SOLVER
    verbose: bool = False

    def requested(self) -> str:
        name = (self.solver or os.environ.get(SOLVER_ENV) or "auto").lower()
        if name not in ("auto", "clarabel", "scs"):
            raise SolverUnavailable(f"unknown solver {name!r}; choose auto, clarabel or scs")
        return name

    def backend(self, problem: "SdpProblem | None" = None) -> str:
        """Concrete solver; ``auto`` picks by the size of the PSD blocks."""
        name = self.requested()
        if name != "auto":
            return name
        if problem is None:
            return "clarabel"
        # the interior-point KKT system holds a dense svec(b) x svec(b) block per cone
        svec = [b * (b + 1) // 2 for b in problem.block_sizes if b > 1]
        cost = sum(v**3 for v in svec)
        memory = AUTO_BYTES_PER_KKT_ENTRY * sum(v * v for v in svec)
        if cost <= AUTO_DENSE_COST and memory <= AUTO_MEMORY_FRACTION * _physical_memory():
            return "clarabel"
        return "scs"


# above this many flops per factorisation the first-order solver is much faster
AUTO_DENSE_COST = 5e10
# peak resident bytes per dense KKT entry, fill-in included (measured, roughly)
AUTO_BYTES_PER_KKT_ENTRY = 1000
AUTO_MEMORY_FRACTION = 0.6


def _physical_memory() -> float:
    try:
        return float(os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES"))
    except (ValueError, OSError, AttributeError):
        return 8e9


@dataclass
class _ConicForm:
    """svec layout of the block-diagonal variable for one solver convention."""

    n_lin: int
    psd_sizes: list
    nvar: int
    A: sp.csc_matrix
    c: np.ndarray
    pairs: np.ndarray  # (nvar, 2) global (row, col), row <= col


def _svec_layout(block_sizes, offsets, lower: bool):
    """Variable order: all 1x1 blocks first, then each larger block's triangle."""
    pairs = []
    singles = [offsets[k] for k, b in enumerate(block_sizes) if b == 1]
    pairs.extend((i, i) for i in singles)
    psd_sizes = []
    for k, b in enumerate(block_sizes):
        if b == 1:
            continue
        o = offsets[k]
        psd_sizes.append(b)
        for j in range(b):
            if lower:   # SCS: lower triangle, column-major
                pairs.extend((o + j, o + i) for i in range(j, b))
            else:       # Clarabel: upper triangle, column-major
                pairs.extend((o + i, o + j) for i in range(j + 1))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2), len(singles), psd_sizes


def _conic_form(problem: SdpProblem, lower: bool) -> _ConicForm:
    n = problem.n
    pairs, n_lin, psd_sizes = _svec_layout(problem.block_sizes, problem.block_offsets, lower)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    # dense lookup would be n^2; use a sorted key array instead
    keys = lo * n + hi
    order = np.argsort(keys)
    sorted_keys = keys[order]

    def to_vars(cols, vals):
        i, j = cols // n, cols % n
        key = np.minimum(i, j) * n + np.maximum(i, j)
        pos = np.searchsorted(sorted_keys, key)
        if np.any(pos >= len(sorted_keys)) or np.any(sorted_keys[np.minimum(pos, len(sorted_keys) - 1)] != key):
            raise ValueError("data outside the block structure")
        scale = np.where(i == j, 1.0, 1.0 / math.sqrt(2.0))
        return order[pos], np.real(vals) * scale

    a = problem.constraints.tocoo()
    vcols, vvals = to_vars(a.col.astype(np.int64), a.data)
    a_eq = sp.csc_matrix((vvals, (a.row, vcols)), shape=(problem.m, len(pairs)))
    f = problem.objective.tocoo()
    fcols, fvals = to_vars(f.row.astype(np.int64) * n + f.col, f.data)
    c = np.zeros(len(pairs))
    np.add.at(c, fcols, fvals)
    return _ConicForm(n_lin, psd_sizes, len(pairs), a_eq, c, np.stack([lo, hi], axis=1))


def _unpack(form: _ConicForm, x: np.ndarray, problem: SdpProblem) -> list[np.ndarray]:
    """Dense blocks of ``Y`` from the svec vector."""
    offsets = problem.block_offsets
    blocks = [np.zeros((b, b)) for b in problem.block_sizes]
    block = problem.block_of()
    lo, hi = form.pairs[:, 0], form.pairs[:, 1]
    val = np.where(lo == hi, x, x / math.sqrt(2.0))
    owner = block[lo]
    for k, blk in enumerate(blocks):
        sel = owner == k
        i, j = lo[sel] - offsets[k], hi[sel] - offsets[k]
        blk[i, j] = val[sel]
        blk[j, i] = val[sel]
    return blocks


def _residuals(problem: SdpProblem, blocks, y: np.ndarray):
    """Independently recomputed value, primal and dual residuals, and dual certificate."""
    n = problem.n
    offsets = problem.block_offsets
    rows, cols, vals = [], [], []
    for k, blk in enumerate(blocks):
        r, c = np.nonzero(blk)
        rows.append(r + offsets[k])
        cols.append(c + offsets[k])
        vals.append(blk[r, c])
    rows, cols, vals = (np.concatenate(v) if v else np.zeros(0) for v in (rows, cols, vals))
    ymat = sp.csr_matrix((vals, (rows.astype(np.int64), cols.astype(np.int64))), shape=(n, n))
    value = float(np.real(problem.objective.multiply(ymat).sum()))
    flat = sp.csr_matrix((vals, (np.zeros_like(rows, dtype=np.int64), rows.astype(np.int64) * n + cols)),
                         shape=(1, n * n))
    res_eq = (problem.constraints @ flat.T).toarray().ravel() - problem.rhs
    psd_viol = max((max(0.0, -np.linalg.eigvalsh(b).min()) for b in blocks), default=0.0)
    primal = max(float(np.max(np.abs(res_eq), initial=0.0)), psd_viol)

    # dual slack Z = sum_k y_k A_k - F must be psd on every block
    zflat = problem.constraints.T @ y
    zcoo = sp.coo_matrix(np.real(zflat).reshape(-1, 1))
    zmat = sp.csr_matrix((zcoo.data, (zcoo.row // n, zcoo.row % n)), shape=(n, n)) - problem.objective.real
    dual = 0.0
    for k, b in enumerate(problem.block_sizes):
        o = offsets[k]
        zb = zmat[o:o + b, o:o + b].toarray()
        zb = 0.5 * (zb + zb.T)
        dual = max(dual, max(0.0, -np.linalg.eigvalsh(zb).min()))
    dual_obj = float(problem.rhs @ y)
    return value, primal, dual, dual_obj


def solve(problem: SdpProblem, config: SolverConfig | None = None, N: int | None = None,
          ppt: bool = False) -> BoundResult:
    """Solve the (real) problem with the configured conic solver.

    The reported ``value`` is the objective at the returned primal point;
    ``safe_value`` adds ``max(gap, eps_abs)``.  When the problem carries a
    ``trace_bound`` in its metadata (an upper bound on ``Tr Y`` over the
    feasible set), ``dual_bound`` is a rigorous upper bound built from the
    dual multipliers: ``b.y + Tr(Y)_max * max(0, -lambda_min(Z))``.
    """
    config = config or SolverConfig()
    if not problem.is_real():
        raise ComplexNotRealified("the conic adapter takes real symmetric data; realify first")
    backend = config.backend(problem)
    t0 = time.perf_counter()
    if backend == "clarabel":
        status, x, y, solver_time = _run_clarabel(problem, config)
        lower = False
    else:
        status, x, y, solver_time = _run_scs(problem, config)
        lower = True
    wall = time.perf_counter() - t0

    if x is None:
        return BoundResult(None, None, N, ppt, status, math.nan, math.nan, math.nan, wall,
                           solver=backend)
    form = _conic_form(problem, lower)
    blocks = _unpack(form, x, problem)
    value, primal, dual, dual_obj = _residuals(problem, blocks, y)
    gap = abs(dual_obj - value)
    tol = 1e3 * max(config.eps_abs, config.eps_rel)
    if status == "check":
        status = (SolverStatus.NEAR_OPTIMAL if max(primal, dual) <= tol and gap <= tol
                  else SolverStatus.NUMERICAL_ERROR)
    ok = status in (SolverStatus.OPTIMAL, SolverStatus.NEAR_OPTIMAL)
    trace_bound = problem.meta.get("trace_bound")
    dual_bound = dual_obj + trace_bound * dual if trace_bound is not None else None
    return BoundResult(
        value=value if ok else None,
        safe_value=value + max(gap, config.eps_abs) if ok else None,
        N=N, ppt=ppt, solver_status=status,
        primal_residual=primal, dual_residual=dual, gap=gap, wall_time=wall,
        raw_value=value, dual_bound=dual_bound, solver=backend,
        solution=blocks, dual=y,
    )


def _run_clarabel(problem: SdpProblem, config: SolverConfig):
    try:
        import clarabel
    except ImportError as exc:  # pragma: no cover
        raise SolverUnavailable("clarabel is not installed") from exc
    form = _conic_form(problem, lower=False)
    nv, m = form.nvar, problem.m
    A = sp.vstack([form.A, -sp.identity(nv, format="csc")], format="csc")
    b = np.concatenate([problem.rhs, np.zeros(nv)])
    cones = []
    if m:
        cones.append(clarabel.ZeroConeT(m))
    if form.n_lin:
        cones.append(clarabel.NonnegativeConeT(form.n_lin))
    cones.extend(clarabel.PSDTriangleConeT(s) for s in form.psd_sizes)
    P = sp.csc_matrix((nv, nv))
    # Redundant equality rows (common in partial-trace systems) can break the
    # first factorisation; retry with stronger regularisation, then without
    # equilibration.
    for retry in ({}, {"static_regularization_constant": 1e-7}, {"equilibrate_enable": False}):
        settings = clarabel.DefaultSettings()
        settings.verbose = config.verbose
        settings.max_iter = config.max_iters
        settings.tol_gap_abs = config.eps_abs
        settings.tol_gap_rel = config.eps_rel
        settings.tol_feas = config.eps_abs
        settings.max_threads = 1
        if config.time_limit is not None:
            settings.time_limit = float(config.time_limit)
        for key, val in retry.items():
            setattr(settings, key, val)
        sol = clarabel.DefaultSolver(P, -form.c, A, b, cones, settings).solve()
        if sol.status not in (clarabel.SolverStatus.NumericalError,
                              clarabel.SolverStatus.InsufficientProgress):
            break
    S = clarabel.SolverStatus
    mapping = {
        S.Solved: SolverStatus.OPTIMAL,
        S.AlmostSolved: SolverStatus.NEAR_OPTIMAL,
        S.PrimalInfeasible: SolverStatus.INFEASIBLE,
        S.AlmostPrimalInfeasible: SolverStatus.INFEASIBLE,
        S.DualInfeasible: SolverStatus.UNBOUNDED,
        S.AlmostDualInfeasible: SolverStatus.UNBOUNDED,
        S.MaxTime: SolverStatus.TIMEOUT,
    }
    status = mapping.get(sol.status, "check")
    if status in (SolverStatus.INFEASIBLE, SolverStatus.UNBOUNDED):
        return status, None, None, sol.solve_time
    x = np.asarray(sol.x)
    y = np.asarray(sol.z)[:m]
    if status == SolverStatus.TIMEOUT and not np.all(np.isfinite(x)):
        return status, None, None, sol.solve_time
    return status, x, y, sol.solve_time


def _run_scs(problem: SdpProblem, config: SolverConfig):
    try:
        import scs
    except ImportError as exc:  # pragma: no cover
        raise SolverUnavailable("scs is not installed") from exc
    form = _conic_form(problem, lower=True)
    nv, m = form.nvar, problem.m
    A = sp.vstack([form.A, -sp.identity(nv, format="csc")], format="csc")
    b = np.concatenate([problem.rhs, np.zeros(nv)])
    cone = {"z": m, "l": form.n_lin, "s": form.psd_sizes}
    kw = dict(eps_abs=config.eps_abs, eps_rel=config.eps_rel,
              max_iters=max(config.max_iters, 100_000), verbose=config.verbose)
    if config.time_limit is not None:
        kw["time_limit_secs"] = float(config.time_limit)
    solver = scs.SCS({"A": A, "b": b, "c": -form.c}, cone, **kw)
    sol = solver.solve()
    info = sol["info"]
    name = info["status"]
    if name == "solved":
        status = SolverStatus.OPTIMAL
    elif name.startswith("infeasible"):
        return SolverStatus.INFEASIBLE, None, None, info["solve_time"]
    elif name.startswith("unbounded"):
        return SolverStatus.UNBOUNDED, None, None, info["solve_time"]
    elif config.time_limit is not None and info["solve_time"] / 1e3 >= config.time_limit:
        status = SolverStatus.TIMEOUT
    else:
        status = "check"
    return status, np.asarray(sol["x"]), np.asarray(sol["y"])[:m], info["solve_time"]
