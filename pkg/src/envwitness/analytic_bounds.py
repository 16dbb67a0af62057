"""Closed-form bounds and screening predicates that need no SDP."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .quantum_core import OutcomeSequence


@dataclass(frozen=True)
class AnalyticBound:
    """Maximum sequence probability without an environment, ``prod_a (n_a/L)^{n_a}``."""

    value: Fraction
    per_symbol_probs: tuple[Fraction, ...]

    @property
    def real(self) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "value": str(self.value),
            "value_float": self.real,
            "per_symbol_probs": [str(q) for q in self.per_symbol_probs],
        }


def omega_one(seq: OutcomeSequence) -> AnalyticBound:
    """Exact ``d_E = 1`` maximum; the optimal POVM is ``E^a = (n_a / L) 1``."""
    L = seq.L
    probs = tuple(Fraction(n, L) for n in seq.counts)
    value = Fraction(1)
    for q, n in zip(probs, seq.counts):
        value *= q**n  # Fraction(0)**0 == 1
    return AnalyticBound(value, probs)


def _periodic_from(symbols, start: int, period: int) -> bool:
    return all(symbols[k] == symbols[k + period] for k in range(start, len(symbols) - period))


def deterministic_complexity(seq: OutcomeSequence) -> int:
    """Fewest states of a deterministic machine that emits ``seq`` from a fixed start.

    Identifying positions ``i < j`` forces ``i + k ~ j + k`` for every
    ``k``, so a consistent identification is a sequence that is periodic
    with period ``j - i`` from ``i`` on, and the machine then needs ``j - 1``
    states.  The answer is the best such cascade, or ``L`` if none works.
    """
    s = seq.symbols
    L = len(s)
    best = L
    for j in range(1, L):          # 0-based position of the later copy
        for i in range(j):
            if _union_find_merge(s, i, j):
                best = min(best, j)
                break
    return best


def _union_find_merge(symbols, i: int, j: int) -> bool:
    """Merge positions ``i`` and ``j`` and propagate to successors; False on conflict."""
    L = len(symbols)
    parent = list(range(L))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    stack = [(i, j)]
    while stack:
        a, b = stack.pop()
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if symbols[a] != symbols[b]:
            return False
        parent[rb] = ra
        if a + 1 < L and b + 1 < L:
            stack.append((a + 1, b + 1))
    return True


def _set_partitions(n: int) -> Iterator[list[int]]:
    """Restricted growth strings: block label of each element."""
    labels = [0] * n

    def rec(k, top):
        if k == n:
            yield list(labels)
            return
        for b in range(top + 2):
            labels[k] = b
            yield from rec(k + 1, max(top, b))

    if n == 0:
        yield []
        return
    yield from rec(1, 0)


def deterministic_complexity_bruteforce(seq: OutcomeSequence) -> int:
    """Minimum over all consistent partitions of the positions (use for small ``L``)."""
    s = seq.symbols
    L = len(s)
    best = L
    for labels in _set_partitions(L):
        k = max(labels) + 1
        if k >= best:
            continue
        out = {}
        nxt = {}
        ok = True
        for pos, b in enumerate(labels):
            if out.setdefault(b, s[pos]) != s[pos]:
                ok = False
                break
            if pos + 1 < L and nxt.setdefault(b, labels[pos + 1]) != labels[pos + 1]:
                ok = False
                break
        if ok:
            best = k
    return best


@dataclass(frozen=True)
class DeterministicModel:
    outputs: tuple[int, ...]      # f(x)
    transitions: tuple[int, ...]  # g(x)

    @property
    def n_states(self) -> int:
        return len(self.outputs)

    def kraus(self, alphabet_size: int) -> list[np.ndarray]:
        """``K_a = sum_{x: f(x) = a} |g(x)><x|`` on the state space."""
        d = self.n_states
        ops = [np.zeros((d, d)) for _ in range(alphabet_size)]
        for x, (a, y) in enumerate(zip(self.outputs, self.transitions)):
            ops[a][y, x] = 1.0
        return ops

    def run(self, length: int, start: int = 0) -> tuple[int, ...]:
        out, x = [], start
        for _ in range(length):
            out.append(self.outputs[x])
            x = self.transitions[x]
        return tuple(out)


def deterministic_model(seq: OutcomeSequence) -> DeterministicModel:
    """A machine with ``deterministic_complexity(seq)`` states emitting ``seq`` from state 0."""
    s = seq.symbols
    L = len(s)
    dc = deterministic_complexity(seq)
    if dc == L:
        # a line of L states; the last loops on itself
        return DeterministicModel(tuple(s), tuple(list(range(1, L)) + [L - 1]))
    j = dc  # 0-based later position of the merged pair
    for i in range(j):
        if _union_find_merge(s, i, j):
            break
    # states 0..j-1 are positions 0..j-1; position j re-enters state i
    outputs = tuple(s[:j])
    transitions = tuple(list(range(1, j)) + [i])
    return DeterministicModel(outputs, transitions)


class Triviality(str, enum.Enum):
    TRIVIALLY_ONE = "trivially_one"
    STRICTLY_BELOW_ONE = "strictly_below_one"
    UNKNOWN = "unknown"


def triviality_check(seq: OutcomeSequence, d_S: int, d_E: int) -> Triviality:
    """Screen the scenario before any numerics.

    Probability one is reachable once the environment can hold a
    deterministic machine for the sequence and the probe can carry all
    its symbols; with fewer probe levels than distinct symbols it is not.
    """
    if d_S < seq.distinct:
        return Triviality.STRICTLY_BELOW_ONE
    if d_E >= deterministic_complexity(seq):
        return Triviality.TRIVIALLY_ONE
    return Triviality.UNKNOWN
