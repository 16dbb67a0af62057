"""Dense linear algebra for the repeated measure-and-prepare protocol.

Basis conventions used throughout the package:

* The joint probe/environment space is ordered environment first, so the
  product basis vector ``|e>|s>`` has index ``e * d_S + s``.
* Choi matrices put the input factor first:
  ``C(Lam) = sum_ij |i><j| (x) Lam(|i><j|)``, so the entry
  ``C[i * d_out + o, j * d_out + o']`` equals ``<o|Lam(|i><j|)|o'>``.
* A single time step of the unitary lives on ``A = I (x) O`` with local
  label ``u = i * d_ES + o``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    InvalidProtocol,
    NonUnitaryInput,
    NotAnInstrument,
    OutcomeOutOfRange,
    TooManyOutcomes,
)

ALGEBRA_TOL = 1e-10


def _is_hermitian(a: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def _is_psd(a: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    return bool(np.linalg.eigvalsh((a + a.conj().T) / 2)[0] >= -tol)


def is_unitary(u: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def _check_density(name: str, rho: np.ndarray, dim: int) -> None:
    if rho.shape != (dim, dim):
        raise InvalidProtocol(f"{name} must be {dim}x{dim}, got {rho.shape}")
    if not _is_hermitian(rho):
        raise InvalidProtocol(f"{name} is not Hermitian")
    if not _is_psd(rho):
        raise InvalidProtocol(f"{name} is not positive semidefinite")
    if abs(np.trace(rho) - 1) > ALGEBRA_TOL:
        raise InvalidProtocol(f"{name} does not have unit trace")


@dataclass(frozen=True)
class MeasurementProtocol:
    """Probe preparation, probe measurement and initial environment state."""

    d_S: int
    d_E: int
    alphabet_size: int
    rho_S0: np.ndarray
    rho_E0: np.ndarray
    povm: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.d_S < 1 or self.d_E < 1 or self.alphabet_size < 1:
            raise InvalidProtocol("dimensions and alphabet size must be positive")
        object.__setattr__(self, "rho_S0", np.asarray(self.rho_S0, dtype=complex))
        object.__setattr__(self, "rho_E0", np.asarray(self.rho_E0, dtype=complex))
        povm = tuple(np.asarray(e, dtype=complex) for e in self.povm)
        object.__setattr__(self, "povm", povm)
        _check_density("rho_S0", self.rho_S0, self.d_S)
        _check_density("rho_E0", self.rho_E0, self.d_E)
        if len(povm) != self.alphabet_size:
            raise InvalidProtocol(
                f"POVM has {len(povm)} elements for an alphabet of size {self.alphabet_size}"
            )
        for a, e in enumerate(povm):
            if e.shape != (self.d_S, self.d_S):
                raise InvalidProtocol(f"POVM element {a} has shape {e.shape}")
            if not _is_hermitian(e) or not _is_psd(e):
                raise InvalidProtocol(f"POVM element {a} is not Hermitian PSD")
        if np.max(np.abs(sum(povm) - np.eye(self.d_S))) > ALGEBRA_TOL:
            raise InvalidProtocol("POVM elements do not sum to the identity")

    @property
    def d_ES(self) -> int:
        return self.d_E * self.d_S

    def with_environment(self, d_E: int, rho_E0: np.ndarray | None = None) -> "MeasurementProtocol":
        """Same probe side, different environment (default ``|0><0|``)."""
        if rho_E0 is None:
            rho_E0 = np.zeros((d_E, d_E))
            rho_E0[0, 0] = 1.0
        return MeasurementProtocol(
            self.d_S, d_E, self.alphabet_size, self.rho_S0, rho_E0, self.povm
        )

    @property
    def is_real(self) -> bool:
        mats = (self.rho_S0, self.rho_E0, *self.povm)
        return all(np.max(np.abs(m.imag), initial=0.0) <= 1e-12 for m in mats)


def projective_protocol(d_E: int = 2, d_S: int = 2) -> MeasurementProtocol:
    """Computational-basis measurement with reset to ``|0>`` on both sides.

    With ``d_S = 2`` this is the reference qubit protocol:
    ``E^a = |a><a|``, ``rho_S0 = |0><0|`` and ``rho_E0 = |0><0|``.
    """
    basis = np.eye(d_S)
    povm = tuple(np.outer(basis[a], basis[a]) for a in range(d_S))
    rho_e = np.zeros((d_E, d_E))
    rho_e[0, 0] = 1.0
    return MeasurementProtocol(d_S, d_E, d_S, povm[0].copy(), rho_e, povm)


@dataclass(frozen=True)
class OutcomeSequence:
    symbols: tuple[int, ...]
    alphabet_size: int = 2

    def __post_init__(self):
        symbols = tuple(int(a) for a in self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if not symbols:
            raise OutcomeOutOfRange("an outcome sequence needs at least one symbol")
        if self.alphabet_size < 1:
            raise OutcomeOutOfRange("alphabet size must be positive")
        for a in symbols:
            if not 0 <= a < self.alphabet_size:
                raise OutcomeOutOfRange(
                    f"symbol {a} outside alphabet of size {self.alphabet_size}"
                )

    @classmethod
    def parse(cls, text: str, alphabet_size: int = 2) -> "OutcomeSequence":
        """Parse ``"001"`` (single digits) or ``"0,0,1"`` (comma separated)."""
        text = text.strip()
        parts = text.split(",") if "," in text else list(text)
        try:
            return cls(tuple(int(p) for p in parts), alphabet_size)
        except ValueError as exc:
            raise OutcomeOutOfRange(f"cannot parse outcome sequence {text!r}") from exc

    @property
    def L(self) -> int:
        return len(self.symbols)

    @property
    def counts(self) -> tuple[int, ...]:
        """Occurrences ``n_a`` of each alphabet symbol."""
        c = [0] * self.alphabet_size
        for a in self.symbols:
            c[a] += 1
        return tuple(c)

    @property
    def distinct(self) -> int:
        """Number of distinct symbols ``n(a)``."""
        return len(set(self.symbols))

    def __str__(self) -> str:
        if self.alphabet_size <= 10:
            return "".join(str(a) for a in self.symbols)
        return ",".join(str(a) for a in self.symbols)


@dataclass(frozen=True)
class ChoiMatrix:
    matrix: np.ndarray
    d_in: int
    d_out: int
    normalized: bool = False

    def __post_init__(self):
        if self.matrix.shape != (self.d_in * self.d_out,) * 2:
            raise DimensionMismatch("Choi matrix shape does not match d_in * d_out")
        if not _is_hermitian(self.matrix):
            raise DimensionMismatch("Choi matrix is not Hermitian")

    def output_marginal(self) -> np.ndarray:
        """Partial trace over the output factor."""
        return partial_trace(self.matrix, (self.d_in, self.d_out), keep=0)

    def input_marginal(self) -> np.ndarray:
        return partial_trace(self.matrix, (self.d_in, self.d_out), keep=1)


@dataclass(frozen=True)
class ObjectiveOperator:
    """Sparse operator whose transpose pairs with ``C_U^{(x)L}``."""

    matrix: sp.csr_matrix
    L: int
    d_ES: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def local_dim(self) -> int:
        return self.d_ES**2

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Non-zero ``(row, col, value)`` triplets of the operator."""
        coo = self.matrix.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data

    def evaluate(self, u: np.ndarray) -> float:
        """``Tr[X^T C_U^{(x)L}]`` using only the non-zeros of ``X``."""
        c = choi_of_unitary(u, normalized=True).matrix
        rows, cols, vals = self.entries()
        d = self.local_dim
        prod = np.ones(len(vals), dtype=complex)
        for _ in range(self.L):
            prod *= c[rows % d, cols % d]
            rows, cols = rows // d, cols // d
        return float(np.real(np.sum(vals * prod)))


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: int | Sequence[int]) -> np.ndarray:
    """Trace out every factor of ``dims`` not listed in ``keep``."""
    dims = tuple(dims)
    keep = (keep,) if isinstance(keep, int) else tuple(sorted(keep))
    n = len(dims)
    t = rho.reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    for offset, k in enumerate(traced):
        axis = k - offset
        t = np.trace(t, axis1=axis, axis2=axis + t.ndim // 2)
    d = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d, d)


def choi_of_map(channel: Callable[[np.ndarray], np.ndarray], d_in: int, d_out: int) -> np.ndarray:
    c = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for i in range(d_in):
        for j in range(d_in):
            e = np.zeros((d_in, d_in), dtype=complex)
            e[i, j] = 1.0
            c[i * d_out:(i + 1) * d_out, j * d_out:(j + 1) * d_out] = channel(e)
    return c


def choi_of_unitary(u: np.ndarray, normalized: bool = False) -> ChoiMatrix:
    """Choi matrix of ``rho -> U rho U^dagger``; rank one, ``|Omega_U><Omega_U|``."""
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise NonUnitaryInput("matrix is not unitary within 1e-10")
    d = u.shape[0]
    # |Omega_U> = sum_i |i> U|i>, component (i, o) = U[o, i]
    omega = u.T.reshape(-1)
    c = np.outer(omega, omega.conj())
    if normalized:
        c /= d
    return ChoiMatrix(c, d, d, normalized)


def apply_measure_prepare(protocol: MeasurementProtocol, outcome: int, rho: np.ndarray) -> np.ndarray:
    """``M_a(rho) = Tr_S[rho (1_E (x) E^a)] (x) rho_S0`` on an ES operator."""
    d_E, d_S = protocol.d_E, protocol.d_S
    eff = np.kron(np.eye(d_E), protocol.povm[outcome])
    rho_e = partial_trace(rho @ eff, (d_E, d_S), keep=0)
    return np.kron(rho_e, protocol.rho_S0)


def _check_outcome(protocol: MeasurementProtocol, outcome: int) -> None:
    if not 0 <= outcome < protocol.alphabet_size:
        raise OutcomeOutOfRange(
            f"outcome {outcome} outside alphabet of size {protocol.alphabet_size}"
        )


def measure_prepare_choi(protocol: MeasurementProtocol, outcome: int,
                         trace_out_final: bool = False) -> ChoiMatrix:
    """Choi matrix ``M_a`` of the measure-and-prepare instrument element.

    With ``trace_out_final`` the output factor is traced out, giving the
    terminal element ``M_hat_a`` used for the last time step.
    """
    _check_outcome(protocol, outcome)
    d = protocol.d_ES
    c = choi_of_map(lambda e: apply_measure_prepare(protocol, outcome, e), d, d)
    if trace_out_final:
        return ChoiMatrix(partial_trace(c, (d, d), keep=0), d, 1)
    return ChoiMatrix(c, d, d)


def _check_sequence(protocol: MeasurementProtocol, seq: OutcomeSequence) -> None:
    if seq.alphabet_size != protocol.alphabet_size:
        raise DimensionMismatch(
            f"sequence alphabet {seq.alphabet_size} != protocol alphabet {protocol.alphabet_size}"
        )


def sequence_probability(protocol: MeasurementProtocol, u: np.ndarray,
                         seq: OutcomeSequence) -> float:
    """Probability of ``seq`` by composing unitary and instrument step by step."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (protocol.d_ES, protocol.d_ES):
        raise DimensionMismatch(f"unitary must be {protocol.d_ES}x{protocol.d_ES}, got {u.shape}")
    _check_sequence(protocol, seq)
    rho = np.kron(protocol.rho_E0, protocol.rho_S0)
    for a in seq.symbols:
        rho = apply_measure_prepare(protocol, a, u @ rho @ u.conj().T)
    return float(np.real(np.trace(rho)))


def build_objective(protocol: MeasurementProtocol, seq: OutcomeSequence) -> ObjectiveOperator:
    """``X = d_ES^L (rho_E0 (x) rho_S0) (x) M_a1 (x) ... (x) M_hat_aL`` as a sparse matrix.

    The factor order I1, O1 I2, ..., O_L coincides with the slot order
    A1 A2 ... A_L, so ``X`` is indexed directly by tuples of local labels.
    """
    _check_sequence(protocol, seq)
    d = protocol.d_ES
    factors = [np.kron(protocol.rho_E0, protocol.rho_S0)]
    for a in seq.symbols[:-1]:
        factors.append(measure_prepare_choi(protocol, a).matrix)
    factors.append(measure_prepare_choi(protocol, seq.symbols[-1], trace_out_final=True).matrix)
    x = sp.csr_matrix(float(d) ** seq.L * factors[0])
    for f in factors[1:]:
        f = np.where(np.abs(f) > 1e-15, f, 0)
        x = sp.kron(x, sp.csr_matrix(f), format="csr")
    x.eliminate_zeros()
    return ObjectiveOperator(x, seq.L, d)


def dilate_kraus(kraus: Sequence[np.ndarray], d_S: int) -> np.ndarray:
    """Unitary on ``E (x) S`` realising the instrument ``{K_a}`` through the probe.

    The isometry ``Q = sum_a K_a (x) |a>_S`` fills the columns ``(e, s=0)``;
    the remaining columns are an orthonormal basis of the complement of its
    range, taken from an SVD and placed in increasing column order.
    """
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    if not kraus:
        raise NotAnInstrument("empty Kraus list")
    d = kraus[0].shape[0]
    if any(k.shape != (d, d) for k in kraus):
        raise DimensionMismatch("Kraus operators must share a square shape")
    if len(kraus) > d_S:
        raise TooManyOutcomes(f"{len(kraus)} Kraus operators need d_S >= {len(kraus)}")
    completeness = sum(k.conj().T @ k for k in kraus)
    if np.max(np.abs(completeness - np.eye(d))) > ALGEBRA_TOL:
        raise NotAnInstrument("Kraus operators are not complete")

    q = np.zeros((d * d_S, d), dtype=complex)
    for a, k in enumerate(kraus):
        q[a::d_S, :] = k  # row (e', a) -> e' * d_S + a
    u = np.zeros((d * d_S, d * d_S), dtype=complex)
    fixed = [e * d_S for e in range(d)]
    u[:, fixed] = q
    free = [c for c in range(d * d_S) if c not in set(fixed)]
    if free:
        u[:, free] = scipy.linalg.null_space(q.conj().T)
    return u


def embed_unitary(u: np.ndarray, d_S: int, d_E_new: int) -> np.ndarray:
    """Pad the environment of ``U`` by a direct sum with the identity.

    Environment levels beyond the original ``d_E`` evolve trivially, so
    any protocol started in ``|0><0|_E`` sees the same statistics.
    """
    d_E = u.shape[0] // d_S
    if d_E_new < d_E:
        raise DimensionMismatch("cannot shrink the environment")
    big = np.eye(d_E_new * d_S, dtype=complex)
    small_idx = np.array([e * d_S + s for e in range(d_E) for s in range(d_S)])
    big[np.ix_(small_idx, small_idx)] = u
    return big


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def deterministic_unitary_001() -> np.ndarray:
    """The ``d_E = 3, d_S = 2`` unitary producing ``001`` with certainty."""
    def ket(e, s):
        return e * 2 + s

    u = np.zeros((6, 6))
    for (e_out, s_out), (e_in, s_in) in [
        ((1, 0), (0, 0)),
        ((2, 0), (1, 0)),
        ((2, 1), (0, 1)),
        ((1, 1), (1, 1)),
        ((0, 0), (2, 1)),
        ((0, 1), (2, 0)),
    ]:
        u[ket(e_out, s_out), ket(e_in, s_in)] = 1.0
    return u
