"""Multi-start gradient ascent of the sequence probability over unitaries.

The unitary is parametrised as ``U = exp(iH)`` with ``H`` Hermitian and
described by ``d^2`` real numbers: the diagonal first, then real and
imaginary parts of the upper triangle in row-major order.  The gradient is
exact: forward states and backward effects give ``dp = 2 Re Tr[dU Gamma]``,
and the derivative of the exponential follows from the eigendecomposition
of ``H`` through the divided differences of ``exp(i x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .quantum_core import (MeasurementProtocol, OutcomeSequence, apply_measure_prepare,
                           partial_trace, sequence_probability)


def hermitian_from_params(theta: np.ndarray, d: int) -> np.ndarray:
    h = np.diag(theta[:d]).astype(complex)
    iu = np.triu_indices(d, 1)
    k = len(iu[0])
    h[iu] = theta[d:d + k] + 1j * theta[d + k:]
    h[(iu[1], iu[0])] = theta[d:d + k] - 1j * theta[d + k:]
    return h


def params_from_hermitian(h: np.ndarray) -> np.ndarray:
    d = h.shape[0]
    iu = np.triu_indices(d, 1)
    return np.concatenate([np.real(np.diag(h)), h[iu].real, h[iu].imag])


def params_from_unitary(u: np.ndarray) -> np.ndarray:
    """Parameters of a Hermitian generator with ``exp(iH) = U`` (principal branch)."""
    t, z = scipy.linalg.schur(np.asarray(u, dtype=complex), output="complex")
    phases = np.angle(np.diag(t))
    return params_from_hermitian((z * phases) @ z.conj().T)


def _expi_and_derivative(h: np.ndarray):
    lam, v = np.linalg.eigh(h)
    e = np.exp(1j * lam)
    diff = lam[:, None] - lam[None, :]
    close = np.abs(diff) < 1e-10
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(close, 1j * e[:, None] * np.ones_like(diff),
                         (e[:, None] - e[None, :]) / np.where(close, 1.0, diff))
    u = (v * e) @ v.conj().T
    return u, v, delta


def _adjoint_instrument(protocol: MeasurementProtocol, a: int, y: np.ndarray) -> np.ndarray:
    """``M_a^dagger(Y) = Tr_S[Y (1 (x) rho_S0)] (x) E^a``."""
    d_E, d_S = protocol.d_E, protocol.d_S
    w = partial_trace(y @ np.kron(np.eye(d_E), protocol.rho_S0), (d_E, d_S), keep=0)
    return np.kron(w, protocol.povm[a])


def probability_and_gradient(theta: np.ndarray, protocol: MeasurementProtocol,
                             seq: OutcomeSequence) -> tuple[float, np.ndarray]:
    d = protocol.d_ES
    h = hermitian_from_params(theta, d)
    u, v, delta = _expi_and_derivative(h)
    ud = u.conj().T
    # forward pass: rho_k after k steps
    states = [np.kron(protocol.rho_E0, protocol.rho_S0)]
    for a in seq.symbols:
        states.append(apply_measure_prepare(protocol, a, u @ states[-1] @ ud))
    p = float(np.real(np.trace(states[-1])))
    # backward pass: Gamma = sum_k rho_{k-1} U^dagger Z_k
    y = np.eye(d, dtype=complex)
    gamma = np.zeros((d, d), dtype=complex)
    for k in range(seq.L - 1, -1, -1):
        z = _adjoint_instrument(protocol, seq.symbols[k], y)
        gamma += states[k] @ ud @ z
        y = ud @ z @ u
    # dp = 2 Re Tr[dU Gamma], dU = V (delta o (V^dagger dH V)) V^dagger
    g_eig = v.conj().T @ gamma @ v
    c = delta.T * g_eig
    k_mat = 2 * (v @ c @ v.conj().T)
    g = 0.5 * (k_mat + k_mat.conj().T)  # dp = Tr[dH G]
    iu = np.triu_indices(d, 1)
    grad = np.concatenate([np.real(np.diag(g)), 2 * np.real(g[iu]), 2 * np.imag(g[iu])])
    return p, grad


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 64
    max_iters: int = 500
    seed: int = 0
    step_rule: str = "lbfgs"
    tol: float = 1e-14
    stop_at: float = 1.0 - 1e-12
    record_trajectory: bool = False


@dataclass
class SearchResult:
    value: float
    unitary: np.ndarray
    restarts_used: int
    converged: bool
    trajectory: list | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "schema": "envwitness.search/1",
            "value": self.value,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "unitary": [[[float(z.real), float(z.imag)] for z in row] for row in self.unitary],
        }


def maximize_probability(protocol: MeasurementProtocol, seq: OutcomeSequence,
                         config: SearchConfig | None = None,
                         warm_starts: Sequence[np.ndarray] = ()) -> SearchResult:
    """Best probability over multi-start L-BFGS ascents; a lower bound on the true maximum.

    Warm-start unitaries are tried first, then random starts with generator
    entries uniform in ``[-pi, pi] / d_ES``.  Stops early once a start
    reaches ``config.stop_at``.
    """
    config = config or SearchConfig()
    if config.step_rule != "lbfgs":
        raise ValueError(f"unsupported step rule {config.step_rule!r}")
    d = protocol.d_ES
    rng = np.random.default_rng(config.seed)
    starts = [params_from_unitary(w) for w in warm_starts]
    best = (-np.inf, None, False, None)
    used = 0

    def fun(theta):
        p, g = probability_and_gradient(theta, protocol, seq)
        return -p, -g

    for k in range(len(starts) + config.restarts):
        theta0 = starts[k] if k < len(starts) else rng.uniform(-np.pi, np.pi, d * d) / d
        traj = [] if config.record_trajectory else None
        cb = None
        if traj is not None:
            cb = lambda th, traj=traj: traj.append((len(traj), -fun(th)[0]))
        res = minimize(fun, theta0, jac=True, method="L-BFGS-B", callback=cb,
                       options={"maxiter": config.max_iters, "ftol": config.tol, "gtol": 1e-10})
        used += 1
        value = -float(res.fun)
        if value > best[0]:
            best = (value, res.x, bool(res.success), traj)
        if best[0] >= config.stop_at:
            break

    u = scipy.linalg.expm(1j * hermitian_from_params(best[1], d))
    value = sequence_probability(protocol, u, seq)
    return SearchResult(value, u, used, best[2], best[3])
