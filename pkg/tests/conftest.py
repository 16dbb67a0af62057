import itertools
import os

import numpy as np
import pytest

from envwitness.quantum_core import OutcomeSequence, projective_protocol


def pytest_collection_modifyitems(config, items):
    if os.environ.get("ENVWITNESS_RUN_MANUAL") == "1":
        return
    skip = pytest.mark.skip(reason="manual long run; set ENVWITNESS_RUN_MANUAL=1")
    for item in items:
        if "manual" in item.keywords:
            item.add_marker(skip)


def dense_sym_isometry(d: int, n: int, types) -> np.ndarray:
    """Rows are |sym(t)> in the full d**n space, built by brute force."""
    v = np.zeros((len(types), d**n))
    pos = {tuple(t): k for k, t in enumerate(types)}
    for labels in itertools.product(range(d), repeat=n):
        counts = [0] * d
        for u in labels:
            counts[u] += 1
        flat = 0
        for u in labels:
            flat = flat * d + u
        v[pos[tuple(counts)], flat] = 1.0
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qubit_protocol():
    return projective_protocol(d_E=2, d_S=2)


def seq(text):
    return OutcomeSequence.parse(text, 2)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(k: int, checks) -> None:
    """checks: iterable of (label, ok, detail). Records a PASS/FAIL line, then asserts."""
    checks = list(checks)
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label}={d}" + ("" if good else " (!)") for label, good, d in checks)
    ACCEPTANCE[k] = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[k])
    assert ok, ACCEPTANCE[k]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 9):
        why = "manual long run, set ENVWITNESS_RUN_MANUAL=1" if k == 4 else "deselected"
        terminalreporter.write_line(ACCEPTANCE.get(k, f"criterion {k}: NOT RUN  {why}"))
