import json

import pytest

from envwitness.cli import main
from envwitness.io import load_unitary
from envwitness.quantum_core import projective_protocol, sequence_probability, OutcomeSequence
from envwitness.sdp_model import import_sdpa, solve


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    assert code == 0, out.err
    return json.loads(out.out)


def test_bound_single(capsys):
    d = run(capsys, "bound", "--seq", "001", "--dE", "1", "--N", "4")
    assert d["schema"] == "envwitness.bound/1"
    assert abs(d["value"] - 4 / 27) < 1e-5
    assert d["safe_value"] >= d["value"]
    assert d["definetti_error_bound"] == pytest.approx(6.0)


def test_bound_constant_sequence_shortcut(capsys):
    d = run(capsys, "bound", "--seq", "000", "--dE", "1", "--N", "1")
    assert d["value"] == 1.0 and d["triviality"] == "trivially_one"
    assert d["definetti_error_bound"] is None


def test_bound_several_sequences(capsys):
    d = run(capsys, "bound", "--seq", "01", "--seq", "001", "--dE", "1", "--N", "3")
    assert [x["seq"] for x in d] == ["01", "001"]
    assert all(abs(x["value"] - 0.25) < 1e-3 for x in d)


def test_bound_sparse_reference(capsys):
    d = run(capsys, "bound", "--seq", "001", "--dE", "2", "--N", "3", "--sparse")
    assert abs(d["value"] - 0.683477) < 5e-3
    assert d["sparse"] and d["num_variables"] == 3566


def test_bound_cache(capsys, tmp_path):
    args = ("bound", "--seq", "01", "--dE", "1", "--N", "2", "--cache", str(tmp_path))
    a = run(capsys, *args)
    assert len(list(tmp_path.glob("bound-*.json"))) == 1
    b = run(capsys, *args)
    assert a["value"] == b["value"]


def test_analytic_and_dc(capsys):
    assert run(capsys, "analytic", "--seq", "0011")["value"] == "1/16"
    d = run(capsys, "dc", "--seq", "0001")
    assert d["dc"] == 4 and len(d["outputs"]) == 4
    assert d["triviality"]["4"] == "trivially_one"


def test_search_writes_unitary(capsys, tmp_path):
    path = tmp_path / "u.toml"
    d = run(capsys, "search", "--seq", "001", "--dE", "2", "--seed", "7", "--restarts", "16",
            "--unitary-out", str(path))
    assert d["value"] > 0.4
    u = load_unitary(path)
    p = sequence_probability(projective_protocol(2, 2), u, OutcomeSequence.parse("001"))
    assert abs(p - d["value"]) < 1e-9


def test_search_dc_warm_start_reaches_one(capsys):
    d = run(capsys, "search", "--seq", "001", "--dE", "3", "--restarts", "0")
    assert d["value"] >= 1 - 1e-9


def test_export_roundtrip(capsys, tmp_path):
    path = tmp_path / "p.dat-s"
    d = run(capsys, "export", "--seq", "01", "--dE", "1", "--N", "2", "--ppt", "--sdpa", str(path))
    assert d["negate_objective"] is False
    res = solve(import_sdpa(path))
    assert abs(res.value - 0.25) < 1e-4


def test_export_against_external_solver(capsys, tmp_path):
    sdpap = pytest.importorskip("sdpap")
    path = tmp_path / "p.dat-s"
    run(capsys, "export", "--seq", "01", "--dE", "1", "--N", "2", "--ppt", "--sdpa", str(path))
    A, b, c, K, J = sdpap.importsdpa(str(path))
    info = sdpap.solve(A, b, c, K, J, {"print": "no"})[2]
    # sdpap reports the primal (minimisation) side, so the maximum is -primalObj
    assert abs(-info["primalObj"] - 0.25) < 1e-4


def test_certify(capsys):
    d = run(capsys, "certify", "--seq", "001", "--observed", "1")
    assert d["certified_d_E_at_least"] == 3
    assert d["conclusion"] == "environment dimension >= 3"
    d = run(capsys, "certify", "--seq", "001", "--observed", "0")
    assert d["conclusion"] == "inconclusive"


def test_protocol_file(capsys, tmp_path):
    main(["protocol", "--dE", "1"])
    text = capsys.readouterr().out
    path = tmp_path / "p.toml"
    path.write_text(text)
    d = run(capsys, "bound", "--seq", "01", "--dE", "1", "--N", "2", "--protocol", str(path))
    assert abs(d["value"] - 0.5) < 1e-4


def test_error_exit_code(capsys):
    assert main(["bound", "--seq", "012", "--dE", "1", "--N", "3"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert "error" in err
    assert main(["bound", "--seq", "001", "--dE", "1", "--N", "2"]) == 2
