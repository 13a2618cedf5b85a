import json

import pytest

from sandpile_tcl import cli
from sandpile_tcl.errors import SchemaError
from sandpile_tcl.graph import build_graph, grid


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_round_trip(tmp_path):
    p = tmp_path / "g.json"
    g = grid(5)
    cli.save_graph(g, str(p))
    assert cli.load_graph(str(p)) == g
    m = build_graph([(0, 1, 3), (1, 2, 2)], 2, conductances={(0, 1): 0.5, (1, 2): 2.0})
    cli.save_graph(m, str(p))
    back = cli.load_graph(str(p))
    assert back == m and back.adjacency[(0, 1)] == 3


def test_schema_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"vertices": 3, "edges": [[0, 1, 1]]}))
    with pytest.raises(SchemaError, match="sink"):
        cli.load_graph(str(p))
    p.write_text('{"vertices": 3,\n "sink": 2,\n "edges": [[0, 1, 1],]}')
    with pytest.raises(SchemaError, match="line 3"):
        cli.load_graph(str(p))
    p.write_text(json.dumps({"vertices": 3, "sink": 2, "edges": [[0, 1, "x"]]}))
    with pytest.raises(SchemaError, match="edges\\[0\\]"):
        cli.load_graph(str(p))


def test_bad_input_exit_code(capsys, tmp_path):
    assert run(capsys, "simulate", "--graph", "nope")[0] == 1
    p = tmp_path / "bad.json"
    p.write_text("{}")
    assert run(capsys, "potential", "--graph", str(p), "--target", "0")[0] == 1
    assert run(capsys, "not-a-command")[0] == 1


def test_simulate(capsys):
    code, out, _ = run(capsys, "simulate", "--graph", "grid:4", "--add", "v=0:k=10")
    assert code == 0
    rec = json.loads(out)
    assert rec["topple_events"] == 2 and rec["stable"][:2] == [2, 2]


def test_impedance_and_bounds(capsys):
    code, out, _ = run(capsys, "impedance", "--graph", "grid:4", "--source", "1,1", "--target", "4,4")
    assert code == 0 and out.splitlines()[1] == "0,15,313"
    code, out, _ = run(capsys, "bounds", "--graph", "grid:4", "--source", "1,1", "--target", "4,4")
    rec = json.loads(out)
    assert code == 0 and rec["ok"] and rec["lower"] <= 313 <= rec["upper"]


def test_csv_reals_round_trip(capsys):
    code, out, _ = run(capsys, "potential", "--graph", "line:3", "--target", "2")
    rows = [r.split(",") for r in out.splitlines()[1:]]
    assert float(rows[0][1]) == 0.2 and rows[0][1] == "0.20000000000000001"


def test_tcl_estimate_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "tcl-estimate", "--graph", "grid:6", "--out", str(a))[0] == 0
    assert run(capsys, "tcl-estimate", "--graph", "grid:6", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("estimate,v,w,gamma,pi,pairs_checked\n")


def test_recurrent(capsys):
    code, out, _ = run(capsys, "recurrent", "--graph", "grid:2", "--config", "3,3,3,3")
    assert code == 0 and json.loads(out)["recurrent"] is True
    code, out, _ = run(capsys, "recurrent", "--graph", "grid:2", "--config", "0,0,0,0")
    assert json.loads(out)["recurrent"] is False


def test_grid_and_spectral(capsys):
    code, out, _ = run(capsys, "grid-sweep", "--n", "4,6")
    assert code == 0 and "exponent_direct" in out
    code, out, _ = run(capsys, "spectral-grid", "--n", "4..6")
    assert code == 0 and out.count("\n") == 5


def test_dual_and_eigen(capsys):
    code, out, _ = run(capsys, "dual", "--graph", "grid:4")
    assert code == 0 and json.loads(out)["relative_gap"] < 1e-6
    assert run(capsys, "eigen-current", "--random", "3")[0] == 0
    assert run(capsys, "eigen-current", "--graph", "grid:3")[0] == 0
    assert run(capsys, "eigen-current")[0] == 1


def test_reduce_and_ksink(capsys):
    code, out, _ = run(capsys, "reduce", "--graph", "honeycomb:2")
    assert code == 0 and json.loads(out)["equivalent"]
    code, out, _ = run(capsys, "reduce", "--graph", "grid:3", "--vi", "0", "--vj", "8")
    assert code == 0 and json.loads(out)["is_path"]
    code, out, _ = run(capsys, "ksink", "--edges", "8", "--k", "5")
    assert json.loads(out) == {"envelope": 500, "exact": "436", "k": 5, "tcl_bound": 4000, "x": 3}


def test_counterexample_reports_mismatch(capsys):
    code, out, _ = run(capsys, "counterexample-4x4")
    lines = out.splitlines()
    assert lines[:4] == ["3 3 3 3", "3 2 1 3", "3 1 2 2", "3 3 2 2"]
    assert lines[4] == "FAIL" and code == 2
    assert json.loads(lines[5])["instance"]["reference"][0] == [3, 3, 3, 0]


def test_property_suite(capsys, monkeypatch):
    monkeypatch.setenv("SANDPILE_THREADS", "2")
    code, out, _ = run(capsys, "property-suite", "--count", "8", "--seed", "100")
    assert code == 0 and out.splitlines()[1] == "8,0"
    monkeypatch.setenv("SANDPILE_THREADS", "zero")
    assert run(capsys, "property-suite", "--count", "1")[0] == 1


def test_violation_prints_instance(capsys):
    code = cli.violation({"a": 1.5}, "boom")
    out = capsys.readouterr().out
    assert code == 2 and json.loads(out) == {"instance": {"a": 1.5}, "violation": "boom"}
