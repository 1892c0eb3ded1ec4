import csv
import json

import pytest

from sharedbuf.cli import main
from sharedbuf.core import SwitchConfig, Trace, read_trace


@pytest.fixture
def trace_file(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(Trace.from_ports(SwitchConfig(2, 4), [1, 1, 2, 2, 2]).to_csv())
    return p


def test_simulate_writes_json(tmp_path, trace_file):
    out = tmp_path / "r.json"
    assert main(["simulate", "--trace", str(trace_file), "--n", "4", "--B", "100",
                 "--policy", "modified-harmonic", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["throughput"] == 5
    assert d["version"] and d["experiment"]["policy"] == "modified-harmonic"


def test_simulate_dt(tmp_path, trace_file):
    out = tmp_path / "r.json"
    assert main(["simulate", "--trace", str(trace_file), "--n", "2", "--B", "4",
                 "--policy", "dt", "--alpha", "1.0", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["policy"] == {"name": "dt", "alpha": 1.0}


def test_missing_trace_exit_2(tmp_path, capsys):
    assert main(["simulate", "--trace", str(tmp_path / "nope.csv"), "--n", "2", "--B", "4"]) == 2
    assert "not found" in capsys.readouterr().err


def test_invalid_trace_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("slot,port\n0,5\n")
    assert main(["simulate", "--trace", str(p), "--n", "2", "--B", "4"]) == 2
    assert "port out of range" in capsys.readouterr().err


def test_gen_round_trip(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["gen", "--kind", "uniform", "--n", "3", "--B", "9", "--m", "40",
                 "--seed", "4", "--out", str(out)]) == 0
    t = read_trace(out, SwitchConfig(3, 9))
    assert len(t) == 40
    # the sidecar lets later commands omit the switch size
    res = tmp_path / "s.json"
    assert main(["simulate", "--trace", str(out), "--out", str(res)]) == 0
    assert json.loads(res.read_text())["config"] == {"n": 3, "B": 9}


def test_gen_needs_seed(capsys):
    assert main(["gen", "--kind", "uniform", "--n", "3", "--B", "9"]) == 2


def test_check_proof_three_verdicts(tmp_path, trace_file):
    out = tmp_path / "c.json"
    code = main(["check-proof", "--trace", str(trace_file), "--n", "2", "--B", "4", "--out", str(out)])
    d = json.loads(out.read_text())
    assert len(d["verdicts"]) == 3 and d["boundsHold"]
    assert code in (0, 1)


def test_check_proof_violation_exit_1(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("slot,port\n0,1\n0,1\n0,2\n1,1\n1,1\n")
    dump = tmp_path / "dump.csv"
    code = main(["check-proof", "--trace", str(p), "--n", "2", "--B", "2",
                 "--out", str(tmp_path / "c.json"), "--dump", str(dump)])
    assert code == 1 and dump.exists()


def test_opt_and_differential(tmp_path, trace_file):
    out = tmp_path / "o.json"
    assert main(["opt", "--trace", str(trace_file), "--n", "2", "--B", "4",
                 "--max-packets", "24", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["optCount"] == 4 and d["exact"]
    out = tmp_path / "d.json"
    assert main(["differential", "--trace", str(trace_file), "--n", "2", "--B", "4", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["firstDivergence"]["packet"] == 3


def test_ratio_sweep_box_has_no_flags(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["ratio-sweep", "--enumerate", "2", "2", "3", "6", "--policies", "modified-harmonic",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert rows and all(r["flagged"] == "0" for r in rows)


def test_ratio_sweep_empty_set(tmp_path, capsys):
    assert main(["ratio-sweep", "--traces", "--n", "2", "--B", "2"]) == 0
    assert capsys.readouterr().out.strip() == "trace,policy,opt,alg,ratio,bound,guardTriggers,flagged"


def test_experiment_replay_is_byte_identical(tmp_path, trace_file, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["simulate", "--trace", trace_file.name, "--n", "2", "--B", "4", "--out", "r.json"]) == 0
    first = (tmp_path / "r.json").read_bytes()
    (tmp_path / "r.json").rename(tmp_path / "exp.json")
    assert main(["--experiment", "exp.json"]) == 0
    assert (tmp_path / "r.json").read_bytes() == first


def test_out_dir_env(tmp_path, trace_file, monkeypatch):
    monkeypatch.setenv("SHAREDBUF_OUT_DIR", str(tmp_path / "outs"))
    assert main(["simulate", "--trace", str(trace_file), "--n", "2", "--B", "4"]) == 0
    assert (tmp_path / "outs" / "simulate.json").exists()


def test_exhaustive_small(tmp_path):
    out = tmp_path / "e.json"
    assert main(["exhaustive", "--ns", "2", "--Bs", "2", "--max-slots", "2", "--max-packets", "4",
                 "--workers", "1", "--out", str(out)]) == 0
    (r,) = json.loads(out.read_text())["results"]
    assert r["violations"] == [] and r["traces"] > 0
