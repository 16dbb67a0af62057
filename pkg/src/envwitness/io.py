"""TOML (de)serialisation of protocols and unitaries.

Matrices are nested arrays; every entry is either a real number or a
``[re, im]`` pair::

    d_S = 2
    d_E = 1
    rho_S0 = [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]
    rho_E0 = [[1]]
    povm = [
      [[1, 0], [0, 0]],
      [[0, 0], [0, 1]],
    ]
"""

from __future__ import annotations

import hashlib
import sys
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidProtocol
from .quantum_core import MeasurementProtocol


def matrix_from_toml(rows) -> np.ndarray:
    def entry(x):
        if isinstance(x, (list, tuple)):
            if len(x) != 2:
                raise InvalidProtocol(f"complex entries must be [re, im] pairs, got {x!r}")
            return complex(float(x[0]), float(x[1]))
        return complex(float(x))

    try:
        return np.array([[entry(x) for x in row] for row in rows], dtype=complex)
    except TypeError as exc:
        raise InvalidProtocol("matrix must be a list of rows") from exc


def matrix_to_toml(m: np.ndarray) -> list:
    m = np.asarray(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def protocol_from_dict(data: dict) -> MeasurementProtocol:
    try:
        povm = [matrix_from_toml(e) for e in data["povm"]]
        return MeasurementProtocol(
            d_S=int(data["d_S"]),
            d_E=int(data.get("d_E", 1)),
            alphabet_size=int(data.get("alphabet_size", len(povm))),
            rho_S0=matrix_from_toml(data["rho_S0"]),
            rho_E0=matrix_from_toml(data.get("rho_E0", [[1.0]])),
            povm=tuple(povm),
        )
    except KeyError as exc:
        raise InvalidProtocol(f"protocol is missing the {exc.args[0]!r} field") from exc


def protocol_to_dict(p: MeasurementProtocol) -> dict:
    return {
        "d_S": p.d_S,
        "d_E": p.d_E,
        "alphabet_size": p.alphabet_size,
        "rho_S0": matrix_to_toml(p.rho_S0),
        "rho_E0": matrix_to_toml(p.rho_E0),
        "povm": [matrix_to_toml(e) for e in p.povm],
    }


def load_protocol(path) -> MeasurementProtocol:
    with open(path, "rb") as fh:
        return protocol_from_dict(tomllib.load(fh))


def dump_protocol(p: MeasurementProtocol, path=None) -> str:
    text = tomli_w.dumps(protocol_to_dict(p))
    if path is not None:
        Path(path).write_text(text)
    return text


def load_unitary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    if "unitary" not in data:
        raise InvalidProtocol("file has no 'unitary' field")
    return matrix_from_toml(data["unitary"])


def dump_unitary(u: np.ndarray, path=None, **extra) -> str:
    text = tomli_w.dumps({**extra, "unitary": matrix_to_toml(u)})
    if path is not None:
        Path(path).write_text(text)
    return text


def protocol_hash(p: MeasurementProtocol) -> str:
    h = hashlib.sha256()
    h.update(f"{p.d_S},{p.d_E},{p.alphabet_size};".encode())
    for m in (p.rho_S0, p.rho_E0, *p.povm):
        h.update(np.round(np.asarray(m, dtype=complex), 12).tobytes())
    return h.hexdigest()[:16]
