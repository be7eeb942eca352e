import json
import subprocess
import sys

import numpy as np
import pytest

import ropper.mm
from ropper.cli import main
from ropper.io import read_csv, read_input_table
from ropper.pipeline import METHODS, fit

UNITS = "id,y,sigma,x1\nalpha,0.3,0.5,1.0\nbeta,1.9,1.2,0.0\ngamma,-0.4,0.8,0.5\nomega,1.1,0.6,0.2\n"


@pytest.fixture
def table(tmp_path):
    p = tmp_path / "units.csv"
    p.write_text(UNITS)
    return str(p)


def test_fit_matches_library_composition(table, tmp_path):
    out = tmp_path / "out"
    assert main(["fit", table, "--intercept", "--out", str(out)]) == 0
    res = fit(read_input_table(table, intercept=True))
    header, rows = read_csv(str(out / "percentiles.csv"))
    assert header == ["id"] + [f"{m}_{k}" for m in METHODS for k in ("raw", "proper")]
    assert [r[0] for r in rows] == ["alpha", "beta", "gamma", "omega"]
    for j, m in enumerate(METHODS):
        proper = [float(r[2 + 2 * j]) for r in rows]
        assert proper == res.percentiles[m]["proper"].values.tolist()
        raw = res.percentiles[m]["raw"]
        if raw is None:
            assert all(r[1 + 2 * j] == "" for r in rows)
        else:
            assert [float(r[1 + 2 * j]) for r in rows] == raw.values.tolist()
    header, rows = read_csv(str(out / "coefficients.csv"))
    assert header == ["term", "beta_mle", "beta_rfure"]
    assert [r[0] for r in rows] == ["intercept", "x1"]
    assert [float(r[1]) for r in rows] == res.beta_mle.tolist()
    assert [float(r[2]) for r in rows] == res.beta_rfure.tolist()
    header, rows = read_csv(str(out / "diagnostics.csv"))
    assert header == ["id", "y", "sigma", "fitted_mle", "fitted_rfure", "B", "V", "R"]
    assert [float(r[7]) for r in rows] == res.diagnostics["R"].tolist()


def test_intercept_flag_adds_a_coefficient(table, tmp_path):
    main(["fit", table, "--out", str(tmp_path / "a")])
    main(["fit", table, "--intercept", "--out", str(tmp_path / "b")])
    _, a = read_csv(str(tmp_path / "a" / "coefficients.csv"))
    _, b = read_csv(str(tmp_path / "b" / "coefficients.csv"))
    assert len(b) == len(a) + 1 and b[0][0] == "intercept"


def test_every_output_has_provenance(table, tmp_path):
    out = tmp_path / "o"
    main(["fit", table, "--intercept", "--out", str(out)])
    for name in ("percentiles.csv", "coefficients.csv", "diagnostics.csv"):
        head = (out / name).read_text().splitlines()
        assert head[0].startswith("# ropper ")
        assert head[1].startswith("# seed=") and head[2].startswith("# input_sha256=")
        assert any(line == "#config fit.intercept=true" for line in head)


def test_missing_sigma_names_the_column(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("id,y,x1\na,1,2\nb,2,3\n")
    assert main(["fit", str(p)]) == 2
    assert "'sigma'" in capsys.readouterr().err


SIM_CFG = "scenario.kind=latent_subgroup\nscenario.K=12\nscenario.replicates=2\nscenario.seed=99\n"


def _simulate(tmp_path, name, *extra):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(SIM_CFG)
    out = tmp_path / name
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--workers", "1", *extra]) == 0
    return out


def test_simulate_byte_identical_rerun(tmp_path):
    a = _simulate(tmp_path, "a")
    b = _simulate(tmp_path, "b")
    for name in ("psel_summary.csv", "psel_replicates.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_rerun_from_embedded_config(tmp_path):
    a = _simulate(tmp_path, "a", "--sweep", "scenario.beta.1=0,1")
    out = tmp_path / "again"
    assert main(["simulate", "--config", str(a / "psel_summary.csv"), "--out", str(out), "--workers", "1"]) == 0
    assert (a / "psel_summary.csv").read_bytes() == (out / "psel_summary.csv").read_bytes()


def test_sweep_rows_and_plot(tmp_path):
    out = _simulate(tmp_path, "s", "--sweep", "scenario.beta.1=-1,0,1", "--plot")
    header, rows = read_csv(str(out / "psel_summary.csv"))
    assert len(rows) == 12
    for col in ("method", "mean_psel", "se", "n_reps", "beta", "sweep_value"):
        assert col in header
    ix = header.index("method")
    assert sorted({r[ix] for r in rows}) == sorted(METHODS)
    assert (out / "curves.svg").read_text().count("<polyline") == 4
    _, reps = read_csv(str(out / "psel_replicates.csv"))
    assert len(reps) == 3 * 2 * 4


def test_simulate_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("scenario.kind=latent_subgroup\nscenario.typo=3\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "unknown config key 'scenario.typo'" in err and ":2:" in err


def test_validate_json_lists_each_suite_once(tmp_path):
    path = tmp_path / "report.json"
    assert main(["validate", "--json", str(path)]) == 0
    report = json.loads(path.read_text())
    names = [s["name"] for s in report["suites"]]
    assert len(names) == len(set(names)) >= 4
    assert report["passed"] is True


def test_corrupted_d_prime_fails_descent_suite(tmp_path, monkeypatch):
    monkeypatch.setattr(ropper.mm, "d_prime", lambda u: 0.5 + 0 * np.asarray(u, dtype=float))
    path = tmp_path / "report.json"
    assert main(["validate", "--json", str(path)]) == 1
    report = json.loads(path.read_text())
    failed = {s["name"] for s in report["suites"] if not s["passed"]}
    assert failed == {"mm_descent"}


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ropper", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("ropper ")
