"""Symmetric-subspace bookkeeping through types (weak integer compositions).

A type ``t = (t_1, ..., t_d)`` with ``sum(t) = n`` labels the basis vector
``|sym(t)> = (t)^{-1/2} sum_{T(u) = t} |u_1 ... u_n>`` of the symmetric
subspace of ``n`` copies of a ``d``-dimensional space, where ``(t)`` is the
multinomial coefficient.

Types are ordered colexicographically: the last count is compared first,
then the one before it, and so on.  For ``d = 2, n = 2`` this gives
``(2,0) < (1,1) < (0,2)``, and the unit type ``e_u`` sits at index ``u``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, EmptyType, SizeMismatch, SizeOverflow
from .quantum_core import ObjectiveOperator


class TypeVector(tuple):
    """Occurrence counts of each local basis label; an immutable tuple."""

    __slots__ = ()

    def __new__(cls, counts):
        counts = tuple(int(c) for c in counts)
        if any(c < 0 for c in counts):
            raise SizeMismatch("type counts must be non-negative")
        return super().__new__(cls, counts)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(self)

    @property
    def total(self) -> int:
        return sum(self)

    def __add__(self, other):
        if not isinstance(other, tuple) or len(other) != len(self):
            return NotImplemented
        return TypeVector(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        return TypeVector(a - b for a, b in zip(self, other))

    def units(self) -> list[int]:
        """Local labels with multiplicity, ascending."""
        return [u for u, c in enumerate(self) for _ in range(c)]

    def __repr__(self):
        return f"TypeVector({tuple(self)})"


def type_of(labels: Sequence[int], d: int) -> TypeVector:
    counts = [0] * d
    for u in labels:
        counts[u] += 1
    return TypeVector(counts)


def _compositions(d: int, n: int) -> Iterator[tuple[int, ...]]:
    if d == 1:
        yield (n,)
        return
    for last in range(n + 1):
        for head in _compositions(d - 1, n - last):
            yield head + (last,)


def _bounded(bound: tuple[int, ...], n: int) -> Iterator[tuple[int, ...]]:
    """Compositions ``r <= bound`` (componentwise) with ``sum(r) = n``, colex order."""
    d = len(bound)
    if d == 1:
        if n <= bound[0]:
            yield (n,)
        return
    room = sum(bound[:-1])
    for last in range(max(0, n - room), min(bound[-1], n) + 1):
        for head in _bounded(bound[:-1], n - last):
            yield head + (last,)


def multinomial(t: Sequence[int]) -> int:
    """``(sum t)! / prod(t_i!)`` as an exact integer."""
    out = math.factorial(sum(t))
    for c in t:
        out //= math.factorial(c)
    return out


@dataclass(frozen=True)
class SymSpace:
    local_dim: int
    copies: int
    types: tuple[TypeVector, ...]
    index_of: dict = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.types)

    def __len__(self) -> int:
        return len(self.types)

    def multinomials(self) -> np.ndarray:
        """Multinomial coefficient of every type, as float64 (exact for n <= 18)."""
        return _multinomial_array(self.local_dim, self.copies)

    def unit_index(self, t: Sequence[int], u: int) -> int:
        return self.index_of[tuple(t)]


@lru_cache(maxsize=None)
def enumerate_types(d: int, n: int) -> SymSpace:
    """All types of ``n`` copies of a ``d``-dimensional space, colex ordered."""
    if d < 1 or n < 0:
        raise SizeMismatch(f"need d >= 1 and n >= 0, got d={d}, n={n}")
    size = math.comb(n + d - 1, n)
    if size > sys.maxsize:
        raise SizeOverflow(f"symmetric subspace dimension {size} exceeds the platform integer width")
    types = tuple(TypeVector(c) for c in _compositions(d, n))
    assert len(types) == size
    return SymSpace(d, n, types, {t: k for k, t in enumerate(types)})


@lru_cache(maxsize=None)
def _multinomial_array(d: int, n: int) -> np.ndarray:
    return np.array([float(multinomial(t)) for t in enumerate_types(d, n).types])


@lru_cache(maxsize=None)
def add_unit_table(d: int, n: int) -> np.ndarray:
    """``table[k, u]`` = index in level ``n + 1`` of type ``k`` (level ``n``) plus ``e_u``."""
    lower, upper = enumerate_types(d, n), enumerate_types(d, n + 1)
    table = np.empty((len(lower), d), dtype=np.int64)
    for k, t in enumerate(lower.types):
        for u in range(d):
            bumped = list(t)
            bumped[u] += 1
            table[k, u] = upper.index_of[tuple(bumped)]
    return table


@lru_cache(maxsize=None)
def remove_unit_table(d: int, n: int) -> np.ndarray:
    """``table[k, u]`` = index in level ``n - 1`` of type ``k`` minus ``e_u``, or -1."""
    upper, lower = enumerate_types(d, n), enumerate_types(d, n - 1)
    table = np.full((len(upper), d), -1, dtype=np.int64)
    for k, t in enumerate(upper.types):
        for u in np.flatnonzero(t):
            dropped = list(t)
            dropped[u] -= 1
            table[k, u] = lower.index_of[tuple(dropped)]
    return table


def type_indices(labels: np.ndarray, d: int) -> np.ndarray:
    """Type index (level = number of columns) of each row of local labels."""
    labels = np.atleast_2d(labels)
    idx = np.zeros(labels.shape[0], dtype=np.int64)
    for level in range(labels.shape[1]):
        idx = add_unit_table(d, level)[idx, labels[:, level]]
    return idx


def split_type(t: Sequence[int], part_sizes: Sequence[int]) -> list[tuple[TypeVector, ...]]:
    """All ordered splittings ``t = r_1 + ... + r_m`` with ``sum(r_i) = part_sizes[i]``."""
    t = tuple(t)
    if sum(part_sizes) != sum(t) or any(k < 0 for k in part_sizes):
        raise SizeMismatch(f"part sizes {tuple(part_sizes)} do not add up to {sum(t)}")

    def rec(rest: tuple[int, ...], sizes: Sequence[int]):
        if len(sizes) == 1:
            yield (TypeVector(rest),)
            return
        for r in _bounded(rest, sizes[0]):
            remainder = tuple(a - b for a, b in zip(rest, r))
            for tail in rec(remainder, sizes[1:]):
                yield (TypeVector(r),) + tail

    return list(rec(t, list(part_sizes)))


class PartyRecord(NamedTuple):
    i: int
    o: int
    s: TypeVector
    weight: Fraction | float


def single_party_decompose(t: Sequence[int], d_ES: int, normalized: bool = False) -> list[PartyRecord]:
    """Split ``|Sym(t)>`` as ``sum_u |u> (x) |Sym(t - e_u)>`` over the first copy.

    Each record gives the first-copy label ``u = i * d_ES + o`` split into
    input and output indices, the remaining type, and a weight.  The
    unnormalised split has unit weights, so normalisation can be attached
    to ``phi_hat = phi / sqrt((t)(t'))`` at the very end.  With
    ``normalized=True`` the weight is ``sqrt((s)/(t))`` instead, which is
    the coefficient of ``|u>|sym(s)>`` in ``|sym(t)>``.
    """
    t = TypeVector(t)
    if len(t) != d_ES * d_ES:
        raise DimensionMismatch(f"type has {len(t)} parts, expected {d_ES * d_ES}")
    if t.total == 0:
        raise EmptyType("cannot split a type with total 0")
    records = []
    for u, c in enumerate(t):
        if c == 0:
            continue
        s = list(t)
        s[u] -= 1
        s = TypeVector(s)
        if normalized:
            weight = math.sqrt(multinomial(s) / multinomial(t))
        else:
            weight = Fraction(1)
        records.append(PartyRecord(u // d_ES, u % d_ES, s, weight))
    return records


def project_objective(X: ObjectiveOperator, N: int, space: SymSpace | None = None) -> sp.csr_matrix:
    """Compress ``X^T (x) 1`` onto the symmetric subspace of ``N`` copies.

    Entry ``(t, t')`` equals ``<sym(t)| X^T (x) 1 |sym(t')>``.  Every
    non-zero ``X[v', v]`` contributes to the entries ``(T(v) + s, T(v') + s)``
    for each tail type ``s`` of ``N - L`` copies, with weight
    ``(s) / sqrt((t)(t'))``; the full tensor space is never formed.
    """
    d = X.local_dim
    L = X.L
    if space is None:
        space = enumerate_types(d, N)
    if space.local_dim != d or space.copies != N:
        raise DimensionMismatch(
            f"space is for d={space.local_dim}, n={space.copies}; objective needs d={d}, n={N}"
        )
    if N < L:
        raise DimensionMismatch(f"N={N} must be at least the sequence length L={L}")

    rows, cols, vals = X.entries()
    digits_r = np.stack([(rows // d ** (L - 1 - k)) % d for k in range(L)], axis=1)
    digits_c = np.stack([(cols // d ** (L - 1 - k)) % d for k in range(L)], axis=1)
    head_r = type_indices(digits_r, d)
    head_c = type_indices(digits_c, d)
    mult = space.multinomials()
    tail = enumerate_types(d, N - L)

    out_r, out_c, out_v = [], [], []
    for s in tail.types:
        tr, tc = head_r, head_c
        for level, u in enumerate(s.units(), start=L):
            tr = add_unit_table(d, level)[tr, u]
            tc = add_unit_table(d, level)[tc, u]
        w = float(multinomial(s)) / np.sqrt(mult[tr] * mult[tc])
        # X^T[c, r] = X[r, c]
        out_r.append(tc)
        out_c.append(tr)
        out_v.append(vals * w)
    dtype = float if np.all(np.abs(np.imag(vals)) <= 1e-12) else complex
    data = np.concatenate(out_v)
    if dtype is float:
        data = np.real(data)
    x = sp.coo_matrix((data, (np.concatenate(out_r), np.concatenate(out_c))),
                      shape=(len(space), len(space)), dtype=dtype).tocsr()
    x.sum_duplicates()
    x.eliminate_zeros()
    return x


def symmetric_power_coordinates(vec: np.ndarray, space: SymSpace) -> np.ndarray:
    """Coordinates of ``|v>^{(x)n}`` in the ``|sym(t)>`` basis: ``sqrt((t)) prod v_u^{t_u}``."""
    vec = np.asarray(vec)
    if vec.shape != (space.local_dim,):
        raise DimensionMismatch("vector does not match the local dimension")
    counts = np.array(space.types, dtype=np.int64)
    with np.errstate(invalid="ignore"):
        powers = np.where(counts > 0, vec[None, :] ** counts, 1.0)
    return np.sqrt(space.multinomials()) * np.prod(powers, axis=1)
