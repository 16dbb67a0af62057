"""Witnessing hidden environment dimension from probe outcome sequences."""

__version__ = "0.1.0"

from .analytic_bounds import (AnalyticBound, Triviality, deterministic_complexity,
                              deterministic_model, omega_one, triviality_check)
from .errors import *  # noqa: F401,F403
from .lower_bound_search import SearchConfig, SearchResult, maximize_probability
from .pipeline import BoundRequest, certify, compute_bound
from .quantum_core import (ChoiMatrix, MeasurementProtocol, ObjectiveOperator, OutcomeSequence,
                           build_objective, choi_of_unitary, dilate_kraus, embed_unitary,
                           projective_protocol, sequence_probability)
from .relaxation_builder import (RelaxationSpec, Representation, build_relaxation,
                                 definetti_error_bound, realify)
from .sdp_model import (BoundResult, SdpProblem, SolverConfig, SolverStatus, export_sdpa,
                        import_sdpa, solve, validate)
from .sparse_reducer import SparsityPattern, effective_sparsity, reduce_problem
from .symmetric_subspace import SymSpace, enumerate_types, multinomial, project_objective
