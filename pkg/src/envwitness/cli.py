"""Command line interface; every command prints JSON on stdout."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .analytic_bounds import (deterministic_complexity, deterministic_model, omega_one,
                              triviality_check)
from .errors import EnvWitnessError
from .io import dump_protocol, dump_unitary, load_protocol
from .lower_bound_search import SearchConfig, maximize_probability
from .pipeline import BoundRequest, cached_bound, certify, prepare_problem
from .quantum_core import (MeasurementProtocol, OutcomeSequence, dilate_kraus, embed_unitary,
                           projective_protocol)
from .relaxation_builder import DEFAULT_BUDGET
from .sdp_model import SolverConfig, _json_default, export_sdpa

CACHE_ENV = "ENVWITNESS_CACHE"


def _protocol(args, d_E: int) -> MeasurementProtocol:
    if args.protocol == "qubit":
        return projective_protocol(d_E, 2)
    base = load_protocol(args.protocol)
    return base if base.d_E == d_E else base.with_environment(d_E)


def _seq(text: str, protocol: MeasurementProtocol) -> OutcomeSequence:
    return OutcomeSequence.parse(text, protocol.alphabet_size)


def _solver(args) -> SolverConfig:
    return SolverConfig(max_iters=args.max_iters, eps_abs=args.eps, eps_rel=args.eps,
                        time_limit=args.time_limit, solver=args.solver, verbose=args.verbose)


def _emit(obj, out=None) -> None:
    text = json.dumps(obj, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _bound_one(job):
    req, cache = job
    return cached_bound(req, cache).to_dict()


def cmd_bound(args) -> int:
    protocol = _protocol(args, args.dE)
    solver = _solver(args)
    jobs = [(BoundRequest(protocol, _seq(s, protocol), args.N, args.ppt, args.sparse, solver,
                          args.budget, not args.no_shortcut), args.cache)
            for s in args.seq]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bound_one, jobs))
    else:
        results = [_bound_one(j) for j in jobs]
    _emit(results[0] if len(results) == 1 else results, args.out)
    return 0


def cmd_certify(args) -> int:
    protocol = _protocol(args, 1)
    seq = _seq(args.seq, protocol)
    report = certify(protocol, seq, args.observed, N=args.N, max_d_E=args.max_dE,
                     sparse=not args.dense, solver=_solver(args), budget=args.budget,
                     cache_dir=args.cache)
    _emit(report, args.out)
    return 0


def cmd_analytic(args) -> int:
    seq = OutcomeSequence.parse(args.seq, args.alphabet)
    out = {"schema": "envwitness.analytic/1", "seq": str(seq), "d_E": 1}
    out.update(omega_one(seq).to_dict())
    _emit(out, args.out)
    return 0


def cmd_dc(args) -> int:
    seq = OutcomeSequence.parse(args.seq, args.alphabet)
    model = deterministic_model(seq)
    dc = deterministic_complexity(seq)
    _emit({
        "schema": "envwitness.dc/1",
        "seq": str(seq),
        "dc": dc,
        "outputs": list(model.outputs),
        "transitions": list(model.transitions),
        "triviality": {d: triviality_check(seq, args.dS, d).value for d in range(1, dc + 1)},
    }, args.out)
    return 0


def cmd_search(args) -> int:
    protocol = _protocol(args, args.dE)
    seq = _seq(args.seq, protocol)
    warm = []
    if args.warm_start == "dc":
        model = deterministic_model(seq)
        if model.n_states <= args.dE and protocol.alphabet_size <= protocol.d_S:
            u = dilate_kraus(model.kraus(protocol.alphabet_size), protocol.d_S)
            warm.append(embed_unitary(u, protocol.d_S, args.dE))
    cfg = SearchConfig(restarts=args.restarts, max_iters=args.max_iters, seed=args.seed)
    res = maximize_probability(protocol, seq, cfg, warm)
    out = res.to_dict()
    out.update(seq=str(seq), d_E=args.dE, d_S=protocol.d_S, seed=args.seed)
    if args.unitary_out:
        dump_unitary(res.unitary, args.unitary_out, seq=str(seq), d_E=args.dE, value=res.value)
    _emit(out, args.out)
    return 0


def cmd_export(args) -> int:
    protocol = _protocol(args, args.dE)
    req = BoundRequest(protocol, _seq(args.seq, protocol), args.N, args.ppt, args.sparse,
                       budget=args.budget)
    problem, extra = prepare_problem(req)
    export_sdpa(problem, args.sdpa, negate_objective=args.negate_objective)
    extra.update(schema="envwitness.export/1", path=str(args.sdpa),
                 negate_objective=args.negate_objective)
    _emit(extra, args.out)
    return 0


def cmd_protocol(args) -> int:
    sys.stdout.write(dump_protocol(projective_protocol(args.dE, args.dS)))
    return 0


def _add_solver_args(p) -> None:
    p.add_argument("--solver", choices=["auto", "clarabel", "scs"], default=None,
                   help="SDP backend (default: $ENVWITNESS_SOLVER or auto; auto uses clarabel "
                        "for small PSD blocks and scs for large ones)")
    p.add_argument("--eps", type=float, default=1e-8, help="absolute and relative tolerance")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                   help="largest SDP variable (scalar entries) before refusing to build")
    p.add_argument("--cache", default=os.environ.get(CACHE_ENV),
                   help=f"directory for cached bounds (default: ${CACHE_ENV})")
    p.add_argument("--verbose", action="store_true", help="solver log on stderr")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="envwitness",
                                 description="Bounds on sequence probabilities with a hidden environment.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seq_multi=False):
        if seq_multi:
            p.add_argument("--seq", action="append", required=True,
                           help="outcome sequence such as 001 or 0,3,1 (repeatable)")
        else:
            p.add_argument("--seq", required=True, help="outcome sequence such as 001 or 0,3,1")
        p.add_argument("--protocol", default="qubit",
                       help="'qubit' (qubit projective protocol) or a TOML protocol file")
        p.add_argument("--out", help="also write the JSON result here")

    p = sub.add_parser("bound", help="SDP upper bound at one hierarchy level")
    common(p, seq_multi=True)
    p.add_argument("--dE", type=int, required=True)
    p.add_argument("--N", type=int, required=True, help="number of symmetric copies")
    p.add_argument("--ppt", action="store_true", help="add partial-transpose constraints")
    p.add_argument("--sparse", action="store_true", help="solve on the effective sparsity")
    p.add_argument("--no-shortcut", action="store_true",
                   help="solve even when probability one is known to be reachable")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for several --seq")
    _add_solver_args(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("certify", help="lower bound on the environment dimension")
    common(p)
    p.add_argument("--observed", type=float, required=True, help="observed sequence probability")
    p.add_argument("--N", type=int, default=None, help="hierarchy level (default: L)")
    p.add_argument("--max-dE", type=int, default=4)
    p.add_argument("--dense", action="store_true", help="skip the sparsity reduction")
    _add_solver_args(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("analytic", help="exact bound without an environment")
    p.add_argument("--seq", required=True)
    p.add_argument("--alphabet", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("dc", help="deterministic complexity and triviality screen")
    p.add_argument("--seq", required=True)
    p.add_argument("--alphabet", type=int, default=2)
    p.add_argument("--dS", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dc)

    p = sub.add_parser("search", help="gradient search for a large probability (lower bound)")
    common(p)
    p.add_argument("--dE", type=int, required=True)
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warm-start", choices=["none", "dc"], default="dc",
                   help="try the deterministic-machine unitary first when it fits")
    p.add_argument("--unitary-out", help="write the best unitary as TOML")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("export", help="write the relaxation in SDPA sparse format")
    common(p)
    p.add_argument("--dE", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--ppt", action="store_true")
    p.add_argument("--sparse", action="store_true")
    p.add_argument("--sdpa", required=True, help="output .dat-s path")
    p.add_argument("--negate-objective", action="store_true",
                   help="write -F as F0 for tools that minimise")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("protocol", help="print the built-in qubit protocol as TOML")
    p.add_argument("--dE", type=int, default=1)
    p.add_argument("--dS", type=int, default=2)
    p.set_defaults(func=cmd_protocol)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EnvWitnessError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(json.dumps({"error": "ValueError", "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
