import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from filtreg.cli import file_digest, main
from filtreg.data import from_right_censored, write_csv
from filtreg.montecarlo import sample_dgp
from filtreg.regression import nadaraya_watson


def _read_curve(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["x"]) for r in rows]), rows


def test_estimate_reduces_to_nadaraya_watson(tmp_path):
    r = np.random.default_rng(1)
    s = from_right_censored(r.random(30), r.exponential(1, 30), np.full(30, np.inf))
    write_csv(s, tmp_path / "toy.csv")
    out = tmp_path / "curve.csv"
    code = main(["estimate", "--input", str(tmp_path / "toy.csv"), "--method", "lc",
                 "--bandwidth", "0.4", "--truncation", "1e9", "--grid", "0.1:0.9:9", "--output", str(out)])
    assert code == 0
    xs, rows = _read_curve(out)
    oracle = [nadaraya_watson(s, "quartic", 0.4, x) for x in xs]
    np.testing.assert_allclose([float(r["estimate"]) for r in rows], oracle, rtol=0, atol=1e-10)
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["method"] == "local-constant" and meta["bandwidth"] == 0.4
    manifest = json.loads(out.with_suffix(".manifest.json").read_text())
    assert manifest["command"] == "estimate"
    assert manifest["outputs"][str(out)] == file_digest(out)
    assert manifest["inputs"][str(tmp_path / "toy.csv")] == file_digest(tmp_path / "toy.csv")
    assert set(manifest["versions"]) >= {"filtreg", "numpy", "scipy", "python"}
    assert len(manifest["config_hash"]) == 64


def test_estimate_missing_event_column(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("x,exit\n0.1,1.0\n")
    code = main(["estimate", "--input", str(tmp_path / "bad.csv"), "--output", str(tmp_path / "o.csv")])
    assert code == 1
    assert "missing column(s) event" in capsys.readouterr().err


def test_estimate_malformed_row_reports_line(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("x,exit,event\n0.1,1.0,1\n0.2,oops,0\n")
    assert main(["estimate", "--input", str(tmp_path / "bad.csv"), "--output", str(tmp_path / "o.csv")]) == 1
    assert "bad.csv:3:" in capsys.readouterr().err


def test_estimate_partial_exit_code(tmp_path):
    s = from_right_censored([0.0, 0.1, 0.2], [1.0, 2.0, 3.0], [np.inf] * 3)
    write_csv(s, tmp_path / "d.csv")
    out = tmp_path / "o.csv"
    code = main(["estimate", "--input", str(tmp_path / "d.csv"), "--bandwidth", "0.3",
                 "--grid", "0:2:5", "--output", str(out)])
    assert code == 2
    _, rows = _read_curve(out)
    assert [r["defined"] for r in rows] == ["1", "0", "0", "0", "0"]


def test_estimate_two_step_on_simulation_sample(tmp_path):
    s, _ = sample_dgp(250, 0)
    write_csv(s, tmp_path / "sim.csv")
    (tmp_path / "ts.json").write_text(json.dumps({"x_range": [0, 1]}))
    out = tmp_path / "ts.csv"
    code = main(["estimate", "--input", str(tmp_path / "sim.csv"), "--method", "two-step",
                 "--truncation", "inf", "--grid", "0:1:50", "--config", str(tmp_path / "ts.json"),
                 "--output", str(out)])
    assert code in (0, 2)
    _, rows = _read_curve(out)
    assert np.mean([r["defined"] == "1" for r in rows]) >= 0.95
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["two_step"]["truncation"] == "inf" and meta["time_bandwidth"] > 0


def test_estimate_median_local_linear(tmp_path):
    s, _ = sample_dgp(200, 1)
    write_csv(s, tmp_path / "sim.csv")
    code = main(["estimate", "--input", str(tmp_path / "sim.csv"), "--method", "ll", "--target", "median",
                 "--grid", "0.1:0.9:9", "--output", str(tmp_path / "m.csv")])
    assert code in (0, 2)


@pytest.mark.parametrize("args", [["estimate", "--input", "x.csv"], ["estimate", "--grid", "1:0:3"], ["nope"]])
def test_usage_errors_are_fatal(args):
    assert main(args) == 1


def _simulate(tmp_path, cfg, name):
    (tmp_path / "study.json").write_text(json.dumps(cfg))
    return main(["simulate", "--config", str(tmp_path / "study.json"), "--outdir", str(tmp_path / name)])


def test_simulate_single_rep_flags_undefined(tmp_path):
    assert _simulate(tmp_path, {"n": 40, "reps": 1, "grid_size": 10}, "one") == 2
    with open(tmp_path / "one" / "spread.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(r["defined"] == "0" and r["std_local_constant"] == "" for r in rows)


def test_simulate_is_deterministic(tmp_path):
    cfg = {"n": 60, "reps": 3, "grid_size": 15, "seed": 4}
    assert _simulate(tmp_path, cfg, "a") == 0
    assert _simulate(tmp_path, cfg, "b") == 0
    for name in ("mean_curve.csv", "qq_efficient.csv", "qq_inefficient.csv", "spread.csv", "summary.json"):
        assert file_digest(tmp_path / "a" / name) == file_digest(tmp_path / "b" / name)
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert len(manifest["outputs"]) == 5 and manifest["seed"] == 4


def test_simulate_invalid_config(tmp_path):
    assert _simulate(tmp_path, {"n": 60, "replications": 3}, "bad") == 1
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["simulate", "--config", str(tmp_path / "broken.json"), "--outdir", str(tmp_path / "x")]) == 1


def test_check_suites(capsys):
    assert main(["check", "--suite", "reductions"]) == 0
    out = capsys.readouterr()
    lines = out.out.splitlines()
    assert len(lines) == 3 and all("PASS" in line for line in lines)
    assert out.err == ""
    assert main(["check", "--suite", "identities"]) == 0
    assert "variance identity" in capsys.readouterr().out


def test_check_unknown_suite(capsys):
    assert main(["check", "--suite", "bogus"]) == 1
    out = capsys.readouterr()
    assert out.out == "" and "unknown suite" in out.err


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "filtreg", "check", "--suite", "shape-fixedpoint"],
                          capture_output=True, text=True)
    assert done.returncode == 0
    assert done.stdout.count("PASS") == 4
