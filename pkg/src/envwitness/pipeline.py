"""End-to-end bound computation shared by the CLI and the tests."""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

from .analytic_bounds import Triviality, omega_one, triviality_check
from .errors import IntractableSize, NoReduction
from .io import protocol_hash
from .quantum_core import MeasurementProtocol, OutcomeSequence
from .relaxation_builder import (DEFAULT_BUDGET, RelaxationSpec, Representation,
                                 SymmetricConstraints, build_relaxation, definetti_error_bound,
                                 symmetric_objective)
from .sdp_model import BoundResult, SdpProblem, SolverConfig, SolverStatus, solve
from .sparse_reducer import reduce_problem


@dataclass(frozen=True)
class BoundRequest:
    protocol: MeasurementProtocol
    seq: OutcomeSequence
    N: int
    ppt: bool = False
    sparse: bool = False
    solver: SolverConfig = SolverConfig()
    budget: int = DEFAULT_BUDGET
    shortcut: bool = True

    def cache_key(self) -> str:
        s = self.solver
        raw = json.dumps([protocol_hash(self.protocol), str(self.seq), self.protocol.d_E, self.N,
                          self.ppt, self.sparse, s.requested(), s.eps_abs, s.eps_rel])
        return hashlib.sha256(raw.encode()).hexdigest()[:24]


def _trivial_result(req: BoundRequest, note: str) -> BoundResult:
    return BoundResult(1.0, 1.0, req.N, req.ppt, SolverStatus.OPTIMAL, 0.0, 0.0, 0.0, 0.0,
                       raw_value=1.0, solver="none", extra={"note": note})


def _base_extra(req: BoundRequest) -> dict:
    p = req.protocol
    return {
        "seq": str(req.seq),
        "d_E": p.d_E,
        "d_S": p.d_S,
        "sparse": req.sparse,
        "definetti_error_bound": (definetti_error_bound(req.seq.L, p.d_ES, req.N)
                                  if req.N >= req.seq.L else None),
    }


def prepare_problem(req: BoundRequest) -> tuple[SdpProblem, dict]:
    """Real SDP for the request, reduced when ``req.sparse``, plus build diagnostics."""
    p, seq = req.protocol, req.seq
    extra = _base_extra(req)
    rep = Representation.FULL_SPACE if req.ppt else Representation.SYMMETRIC
    spec = RelaxationSpec(p, seq, req.N, req.ppt, rep, req.budget)
    t0 = time.perf_counter()
    if req.sparse and rep is Representation.SYMMETRIC and p.is_real:
        # constraints generated on demand; the full row set is never built
        d = p.d_ES ** 2
        dim = math.comb(req.N + d - 1, req.N)
        if dim * dim > req.budget:
            raise IntractableSize(f"symmetric variable {dim}x{dim} exceeds budget {req.budget}")
        source = SymmetricConstraints(p.d_ES, req.N)
        red = reduce_problem(objective=symmetric_objective(spec), source=source,
                             meta={"trace_bound": 1.0, "realify": "a"})
        problem = red.reduced
        extra["reduction"] = red.report()
    else:
        problem = build_relaxation(spec)
        if req.sparse and len(problem.block_sizes) == 1:
            try:
                red = reduce_problem(problem)
                problem = red.reduced
                extra["reduction"] = red.report()
            except NoReduction:
                extra["reduction"] = {"note": "effective sparsity is the whole matrix; solved densely"}
    extra["build_time_s"] = time.perf_counter() - t0
    extra["num_variables"] = problem.num_variables
    extra["num_constraints"] = problem.m
    return problem, extra


def compute_bound(req: BoundRequest) -> BoundResult:
    """Level-``N`` upper bound on the sequence probability for ``req.protocol``."""
    triv = triviality_check(req.seq, req.protocol.d_S, req.protocol.d_E)
    if req.shortcut and triv is Triviality.TRIVIALLY_ONE:
        res = _trivial_result(req, "probability one is reachable; the bound is trivial")
        res.extra.update(_base_extra(req), triviality=triv.value)
        return res
    problem, extra = prepare_problem(req)
    extra["triviality"] = triv.value
    res = solve(problem, req.solver, N=req.N, ppt=req.ppt)
    res.extra.update(extra)
    return res


def cached_bound(req: BoundRequest, cache_dir=None) -> BoundResult:
    if cache_dir is None:
        return compute_bound(req)
    path = Path(cache_dir) / f"bound-{req.cache_key()}.json"
    if path.exists():
        return BoundResult.from_dict(json.loads(path.read_text()))
    res = compute_bound(req)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(res.to_json(indent=2))
    return res


def certify(protocol: MeasurementProtocol, seq: OutcomeSequence, observed: float,
            N: int | None = None, max_d_E: int = 4, sparse: bool = True,
            solver: SolverConfig = SolverConfig(), budget: int = DEFAULT_BUDGET,
            cache_dir=None) -> dict:
    """Largest ``d`` whose safe bound the observed probability exceeds.

    ``d_E = 1`` uses the exact closed form; larger environments use the
    safe value of the level-``N`` relaxation (default ``N = L``).  The sweep
    stops at the first bound that is not violated, at a trivial bound, or
    when the next relaxation is too large.
    """
    if not 0.0 <= observed <= 1.0:
        raise ValueError("observed probability must lie in [0, 1]")
    N = seq.L if N is None else N
    rows = []
    certified = None
    stop = "max_d_E reached"
    for d in range(1, max_d_E + 1):
        proto = protocol.with_environment(d)
        if d == 1:
            exact = omega_one(seq)
            bound, kind = float(exact.value), "analytic"
            row = {"d_E": 1, "bound": bound, "exact": str(exact.value), "kind": kind}
        elif triviality_check(seq, proto.d_S, d) is Triviality.TRIVIALLY_ONE:
            rows.append({"d_E": d, "bound": 1.0, "kind": "trivial"})
            stop = "bound is trivial"
            break
        else:
            req = BoundRequest(proto, seq, N, sparse=sparse, solver=solver, budget=budget)
            try:
                res = cached_bound(req, cache_dir)
            except IntractableSize as exc:
                rows.append({"d_E": d, "bound": None, "kind": "intractable", "note": str(exc)})
                stop = "relaxation too large"
                break
            if not res.ok or res.safe_value is None:
                rows.append({"d_E": d, "bound": None, "kind": "solver_failed",
                             "status": res.solver_status.value})
                stop = "solver failed"
                break
            bound, kind = res.safe_value, f"sdp_N{N}"
            row = {"d_E": d, "bound": bound, "kind": kind}
        row["violated"] = observed > bound
        rows.append(row)
        if not row["violated"]:
            stop = "bound not violated"
            break
        certified = d + 1
    return {
        "schema": "envwitness.certify/1",
        "seq": str(seq),
        "observed": observed,
        "certified_d_E_at_least": certified,
        "conclusion": (f"environment dimension >= {certified}" if certified else "inconclusive"),
        "stopped": stop,
        "bounds": rows,
    }
