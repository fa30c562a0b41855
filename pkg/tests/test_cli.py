import json
import subprocess
import sys

import pytest

from mixcal.cli import main


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analytic_calibrated(capsys):
    code, out, err = _run(["analytic", "--theta-hat", "1,0", "--theta-star", "1,0"], capsys)
    assert code == 0 and abs(json.loads(out)["ece"]) <= 1e-10 and err == ""


def test_analytic_mce_and_shrink(capsys):
    code, out, _ = _run(["analytic", "--theta-hat", "1,1", "--theta-star", "1,0", "--mce", "--shrink", "0.5"], capsys)
    d = json.loads(out)
    assert code == 0 and d["ece"] <= 1e-10 and d["mce"] == 0


def test_bad_trials_exit_2(capsys):
    code, out, err = _run(["theorem", "--id", "T9", "--trials", "0"], capsys)
    assert code == 2 and out == "" and "usage" in err


def test_unknown_flag_exit_2(capsys):
    code, out, _ = _run(["analytic", "--theta-hat", "1", "--theta-star", "1", "--bogus"], capsys)
    assert code == 2 and out == ""


def test_missing_required_exit_2(capsys):
    assert _run(["simulate", "--p", "2"], capsys)[0] == 2


def test_degenerate_exit_3(capsys):
    code, out, err = _run(["analytic", "--theta-hat", "0,0", "--theta-star", "1,0"], capsys)
    assert code == 3 and out == "" and "zero vector" in err


def test_dimension_mismatch_exit_2(capsys):
    assert _run(["analytic", "--theta-hat", "1,0,0", "--theta-star", "1,0"], capsys)[0] == 2


def test_simulate_and_reliability(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert _run(["simulate", "--p", "3", "--n", "500", "--theta-norm", "1", "--seed", "4", "--out", str(data)], capsys)[0] == 0
    assert data.read_text().startswith("y,x1,x2,x3\n")
    rep = tmp_path / "r.json"
    code, out, _ = _run(["reliability", "--data", str(data), "--theta-hat", "1,0,0", "--bins", "10",
                         "--scheme", "equal_mass", "--out", str(rep)], capsys)
    assert code == 0 and out == ""
    assert json.loads(rep.read_text())["total"] == 500


def test_seed_env(tmp_path, capsys, monkeypatch):
    a, b, c = (tmp_path / f"{k}.csv" for k in "abc")
    base = ["simulate", "--p", "2", "--n", "10", "--theta-norm", "1"]
    monkeypatch.setenv("MIXCAL_SEED", "9")
    _run(base + ["--out", str(a)], capsys)
    _run(base + ["--seed", "9", "--out", str(b)], capsys)
    _run(base + ["--seed", "1", "--out", str(c)], capsys)
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()


def test_theorem_deterministic_across_workers(tmp_path, capsys):
    outs = []
    for w in ("1", "2", "1"):
        path = tmp_path / f"v{len(outs)}.json"
        args = ["theorem", "--id", "T1", "--trials", "5", "--seed", "42", "--p", "50", "--n-l", "50",
                "--workers", w, "--out", str(path)]
        assert _run(args, capsys)[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_theorem_table_and_csv(tmp_path, capsys):
    table = tmp_path / "t.csv"
    code, out, _ = _run(["theorem", "--id", "T2", "--trials", "3", "--format", "csv", "--table", str(table)], capsys)
    assert code == 0 and out.splitlines()[0].startswith("theorem_id,")
    assert len(table.read_text().splitlines()) == 4


def test_sweep(capsys):
    code, out, _ = _run(["sweep", "--ratios", "0.5,1", "--n-l", "40", "--theta-norm", "3", "--trials", "3",
                         "--seed", "1", "--workers", "1"], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("c_ratio,p,mean_derivative") and len(lines) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mixcal", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "theorem" in proc.stdout
