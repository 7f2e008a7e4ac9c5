import json
import subprocess
import sys

import numpy as np
import pytest

from wdro.cli import main
from wdro.fileio import read_matrix_csv, read_rows_csv


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def scalar_data(tmp_path):
    p = tmp_path / "data.csv"
    p.write_text("1\n-1\n1\n-1\n")
    return p


def test_estimate_scalar(tmp_path, scalar_data):
    out = tmp_path / "x.csv"
    assert run("estimate", "--data", scalar_data, "--rho", 0.5, "--out", out) == 0
    assert read_matrix_csv(out)[0, 0] == pytest.approx(4 / 9, abs=1e-15)
    meta = json.loads((tmp_path / "x.csv.json").read_text())
    assert meta["metadata"]["version"] and meta["metadata"]["parameters"]["rho"] == 0.5
    assert meta["gamma"] == pytest.approx(4 / 3)


def test_estimate_zero_radius_round_trip(tmp_path, rng):
    data = rng.standard_normal((40, 3)) @ np.diag([1.0, 2.0, 0.5])
    np.savetxt(tmp_path / "d.csv", data, delimiter=",")
    out = tmp_path / "x.csv"
    assert run("estimate", "--data", tmp_path / "d.csv", "--rho", 0, "--out", out) == 0
    x = read_matrix_csv(out)
    assert np.allclose(x, np.linalg.inv(data.T @ data / 40), atol=1e-10)
    assert run("estimate", "--data", tmp_path / "d.csv", "--auto-rule", "--out", out) == 0
    x = read_matrix_csv(out)
    assert np.array_equal(x, x.T)
    assert np.linalg.eigvalsh(x).min() > 0


def test_estimate_errors(tmp_path, scalar_data, capsys):
    out = tmp_path / "x.csv"
    assert run("estimate", "--data", scalar_data, "--rho", -1, "--out", out) == 2
    assert "rho must be nonnegative" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\nx,3\n")
    assert run("estimate", "--data", bad, "--rho", 0.1, "--out", out) == 2
    few = tmp_path / "few.csv"
    few.write_text("1,2\n3,4\n")
    assert run("estimate", "--data", few, "--rho", 0.1, "--out", out) == 2
    assert run("estimate", "--data", tmp_path / "missing.csv", "--rho", 0.1, "--out", out) == 2


def test_rho_star(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("10\n")
    assert run("rho-star", "--sigma0", tmp_path / "s.csv") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["rho_star"] == pytest.approx(4.74342, abs=1e-5)
    assert rep["metadata"]["command"] == "rho-star"

    (tmp_path / "i.csv").write_text("1,0\n0,1\n")
    assert run("rho-star", "--sigma0", tmp_path / "i.csv", "--mc-check", 200000, "--seed", 3) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["rho_star"] == pytest.approx(11 / (2 * np.sqrt(2)), abs=1e-10)
    assert abs(rep["mc"]["rho_star"] - rep["rho_star"]) <= 3 * rep["mc"]["mc_std_error"]


def test_rho_star_errors(tmp_path):
    (tmp_path / "ns.csv").write_text("1,2\n0,1\n")
    assert run("rho-star", "--sigma0", tmp_path / "ns.csv") == 2
    (tmp_path / "ind.csv").write_text("1,2\n2,1\n")
    assert run("rho-star", "--sigma0", tmp_path / "ind.csv") == 2


def test_experiment_outputs(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("10\n")
    args = ["experiment", "--sigma0", tmp_path / "s.csv", "--n-grid", "10,30,90,270", "--trials", 30, "--seed", 4]
    assert run(*args, "--out-dir", tmp_path / "a", "--svg", tmp_path / "a" / "fig.svg") == 0
    assert run(*args, "--out-dir", tmp_path / "b", "--threads", 3) == 0
    for name in ("rho_hat.csv", "regression.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    n, rho = read_rows_csv(tmp_path / "a" / "rho_hat.csv")
    assert list(n) == [10, 30, 90, 270] and np.all(rho > 0)
    first = (tmp_path / "a" / "rho_hat.csv").read_text().splitlines()[0]
    assert json.loads(first[2:])["parameters"]["seed"] == 4
    rep = json.loads((tmp_path / "a" / "regression.json").read_text())
    assert rep["regression"]["points"] == 4
    assert rep["theory"]["log_rho_star"] == pytest.approx(1.5568, abs=1e-4)
    svg = (tmp_path / "a" / "fig.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "</svg>" in svg


def test_experiment_config_file(tmp_path):
    (tmp_path / "run.cfg").write_text("sigma0 = [[10]]\nn_grid = 10, 40, 160\ntrials = 20\nseed = 2\n")
    assert run("experiment", "--config", tmp_path / "run.cfg", "--out-dir", tmp_path / "o") == 0
    (tmp_path / "p.cfg").write_text("preset = table2\ntrials = 5\n")
    assert run("experiment", "--config", tmp_path / "p.cfg", "--out-dir", tmp_path / "p") == 0
    rep = json.loads((tmp_path / "p" / "regression.json").read_text())
    assert len(rep["metadata"]["parameters"]["sigma0"]) == 3


def test_experiment_errors(tmp_path):
    (tmp_path / "s.csv").write_text("10\n")
    base = ["experiment", "--sigma0", tmp_path / "s.csv", "--n-grid", "10,20,40", "--out-dir", tmp_path]
    assert run(*base, "--trials", 0) == 2
    assert run(*base[:-2], "--trials", 5, "--n-grid", "40,20,10", "--out-dir", tmp_path) == 2
    assert run("experiment", "--out-dir", tmp_path) == 2
    (tmp_path / "bad.cfg").write_text("trials = 5\nbogus = 1\n")
    assert run("experiment", "--config", tmp_path / "bad.cfg") == 2


def test_check(capsys):
    assert run("check", "--dim", 1, "--seed", 7) == 0
    out = capsys.readouterr().out
    assert "15/15 checks passed" in out and "slack=" in out
    assert run("check", "--dim", 0) == 2
    assert run("check", "--dim", 11) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wdro.cli", "check", "--dim", "0"], capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "wdro.cli"], capture_output=True, text=True)
    assert proc.returncode == 2
