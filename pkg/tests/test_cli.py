import json
import subprocess
import sys

import pytest

from polyheat import cli

FAST = {
    "beam-modes": ["--n_max", "3"],
    "bounds-sweep": ["--omega_max", "1", "--omega_step", "1", "--n_max", "2", "--points", "64"],
    "weyl-series": ["--n_max", "5"],
    "approx-id": ["--family", "power", "--alpha", "1", "--count", "6"],
    "ratio-lemma": ["--t_max", "1e4", "--count", "5"],
    "fullspace-converge": ["--alpha", "1", "--count", "4", "--tol", "0.5"],
    "fullspace-positivity": ["--count", "12"],
    "cylinder-converge": ["--My", "64", "--n_modes", "4", "--Mx", "128", "--t0", "0.05", "--count", "4",
                          "--tol", "0.5"],
    "cylinder-sign": ["--My", "64", "--n_modes", "4", "--Mx", "128", "--t0", "0.01", "--factor", "4",
                      "--count", "4"],
    "remainder": ["--My", "64", "--n_modes", "4", "--Mx", "128", "--count", "4"],
}


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


@pytest.mark.parametrize("experiment", sorted(FAST))
def test_every_experiment_writes_outputs(tmp_path, experiment):
    code = cli.main([experiment, "--out", str(tmp_path), *FAST[experiment]])
    m = manifest(tmp_path)
    assert code in (0, 1)
    assert m["exit_code"] == code and m["status"] == ("pass" if code == 0 else "fail")
    assert (tmp_path / "results.csv").exists() and (tmp_path / "summary.json").exists()
    assert set(m) >= {"config", "resolved", "version", "assertions", "wall_time_s"}


@pytest.mark.parametrize("experiment,expected", [
    ("ratio-lemma", 0), ("weyl-series", 1), ("beam-modes", 1), ("bounds-sweep", 0),
])
def test_exit_codes(tmp_path, experiment, expected):
    assert cli.main([experiment, "--out", str(tmp_path), *FAST[experiment]]) == expected


def test_failed_assertions_listed(tmp_path):
    cli.main(["beam-modes", "--out", str(tmp_path), "--n_max", "3"])
    assert manifest(tmp_path)["assertions"] == {"residual_ok": True, "k_in_J_n": False}


@pytest.mark.parametrize("args,fragment", [
    (["beam-modes", "--n_max", "0"], "n_max"),
    (["beam-modes", "--n_max", "2.5"], "n_max"),
    (["beam-modes", "--bogus", "1"], "bogus"),
    (["weyl-series", "--k", "0.2"], "1/4"),
    (["fullspace-converge", "--factor", "1"], "factor"),
    (["fullspace-converge", "--K", "2,1"], "K"),
    (["cylinder-sign", "--datum", "negative", "--My", "64", "--n_modes", "4", "--Mx", "128", "--count", "2"],
     "projection"),
    (["cylinder-converge", "--My", "16", "--n_modes", "17"], "n_modes"),
])
def test_validation_exit_two(tmp_path, args, fragment):
    code = cli.main([args[0], "--out", str(tmp_path), *args[1:]])
    m = manifest(tmp_path)
    assert code == 2 and m["exit_code"] == 2 and m["status"] == "error"
    assert fragment in m["message"]


def test_missing_value(tmp_path):
    assert cli.main(["beam-modes", "--out", str(tmp_path), "--n_max"]) == 2


def test_unknown_experiment(tmp_path):
    assert cli.main(["nope", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_three(tmp_path, monkeypatch):
    from polyheat import NumericalError

    def boom(p, out):
        raise NumericalError("forced")

    monkeypatch.setitem(cli.RUNNERS, "beam-modes", boom)
    assert cli.main(["beam-modes", "--out", str(tmp_path)]) == 3
    assert manifest(tmp_path)["exit_code"] == 3


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# beam table\nn_max = 4\nresidual-tol = 1e-9\n")
    out = tmp_path / "o"
    cli.main(["beam-modes", "--config", str(cfg), "--out", str(out), "--n_max=2"])
    m = manifest(out)
    assert m["resolved"]["n_max"] == 2 and m["resolved"]["residual_tol"] == 1e-9
    assert len((out / "results.csv").read_text().splitlines()) == 3


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n_max 4\n")
    assert cli.main(["beam-modes", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert manifest(tmp_path / "o")["exit_code"] == 2


def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["cylinder-converge", *FAST["cylinder-converge"]]
    cli.main([args[0], "--out", str(a), *args[1:]])
    cli.main([args[0], "--out", str(b), *args[1:]])
    for name in ("results.csv", "summary.json", "slices.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_csv_columns(tmp_path):
    cli.main(["ratio-lemma", "--out", str(tmp_path), *FAST["ratio-lemma"]])
    header = (tmp_path / "results.csv").read_text().splitlines()[0]
    assert header == "instance,alpha,n,t,f_closed,f_quadrature,g,ratio,slope_estimate"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "polyheat", "weyl-series", "--out", str(tmp_path), "--n_max", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "exit 1" in proc.stdout


def test_short_parameter_names_not_taken_as_flags(tmp_path):
    code = cli.main(["fullspace-converge", "--out", str(tmp_path), "--h", "0.25", "--R0", "16", "--count", "3",
                     "--coeffs", "4,0:1;2,2:2;0,4:1"])
    assert code in (0, 1)
    assert manifest(tmp_path)["resolved"]["h"] == 0.25
