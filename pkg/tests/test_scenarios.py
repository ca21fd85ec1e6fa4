import csv

import numpy as np
import pytest

from epispatial.config import load_config
from epispatial.errors import ConfigError
from epispatial.scenarios import SWEEP_COLUMNS, format_value, read_report, run_scenario, run_sweep, sweep_config


def test_eigen_constant_report(tmp_path, scenario_path):
    res = run_scenario(load_config(scenario_path("eigen_const_3")), tmp_path)
    text = (tmp_path / "report.txt").read_text()
    assert "lambda0=3.000000" in text and "regime=endemic" in text
    assert abs(float(read_report(tmp_path / "report.txt")["lambda0"]) - 3) <= 1e-8
    assert (tmp_path / "xi.txt").exists() and res.report["iterations"] >= 0


def test_coupled_pde_endemic_report(tmp_path, scenario_path):
    run_scenario(load_config(scenario_path("coupled_pde_endemic")), tmp_path)
    rep = read_report(tmp_path / "report.txt")
    assert rep["regime"] == "endemic"
    assert float(rep["s_star"]) == 0.0


def test_seir_susceptibles_nonincreasing(tmp_path, scenario_path):
    run_scenario(load_config(scenario_path("seir_extinction")), tmp_path)
    with open(tmp_path / "timeseries.csv") as fh:
        rows = list(csv.DictReader(fh))
    s = np.array([float(r["S"]) for r in rows])
    assert len(s) > 10 and np.all(np.diff(s) <= 0)


@pytest.mark.parametrize("name", ["host_uniform", "seir_extinction", "fisher_kpp_positive"])
def test_byte_identical_outputs(tmp_path, scenario_path, name):
    cfg = load_config(scenario_path(name)).with_overrides(horizon=2 if name == "host_uniform" else None)
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_pde_artifacts(tmp_path, scenario_path):
    cfg = load_config(scenario_path("host_spatial")).with_overrides(horizon=1)
    run_scenario(cfg, tmp_path)
    assert (tmp_path / "timeseries.csv").exists()
    assert any((tmp_path / "snapshots").iterdir())


# -- sweeps --

def test_sweep_three_regimes(tmp_path, scenario_path):
    cfg = load_config(scenario_path("reservoir_endemic"))
    rows = run_sweep(cfg, "sigma1", [2.0, 0.5, 1.0], tmp_path)
    assert [r["value"] for r in rows] == [0.5, 1.0, 2.0]
    assert [r["regime"] for r in rows] == ["extinction", "indeterminate", "endemic"]
    lam = [r["lambda0"] for r in rows]
    assert lam == sorted(lam)
    np.testing.assert_allclose(lam, [-1.0, 0.0, 2.0], atol=1e-12)
    assert (tmp_path / "sweep.csv").read_text().startswith("value,lambda0,regime")
    assert (tmp_path / "runs" / "sigma1=0.5" / "report.txt").exists()


def test_sweep_single_value_matches_scenario(scenario_path):
    cfg = load_config(scenario_path("coupled_pde_extinction")).with_overrides(horizon=2)
    (row,) = run_sweep(cfg, "sigma1", [0.5])
    rep = run_scenario(cfg).report
    assert row["lambda0"] == rep["lambda0"] and row["regime"] == rep["regime"]
    assert row["mean_s"] == rep["mean_s"] and row["sup_psi"] == rep["sup_psi"]


def test_sweep_eigen_monotone(scenario_path):
    cfg = load_config(scenario_path("eigen_const_0"))
    rows = run_sweep(cfg, "a", [-1, -0.25, 0.5, 2])
    lam = [r["lambda0"] for r in rows]
    assert all(x <= y + 1e-12 for x, y in zip(lam, lam[1:]))


def test_sweep_records_failed_rows(scenario_path):
    rows = run_sweep(load_config(scenario_path("reservoir_endemic")), "m", [0.0, 1.0])
    assert rows[0]["regime"] == "failed" and "m must be positive" in rows[0]["error"]
    assert rows[1]["regime"] == "endemic" and rows[1]["error"] == ""


def test_sweep_unknown_parameter(scenario_path):
    cfg = load_config(scenario_path("reservoir_endemic"))
    with pytest.raises(ConfigError, match="not in the base config"):
        run_sweep(cfg, "gamma9", [1.0])
    with pytest.raises(ConfigError, match="constant coefficients"):
        sweep_config(load_config(scenario_path("host_spatial")), "sigma", 1.0)


def test_parallel_sweep_matches_serial(monkeypatch, scenario_path):
    cfg = load_config(scenario_path("reservoir_endemic"))
    def table():
        return [[format_value(r[k]) for k in SWEEP_COLUMNS] for r in run_sweep(cfg, "sigma1", [0.5, 2.0])]

    serial = table()
    monkeypatch.setenv("EPISPATIAL_THREADS", "2")
    assert table() == serial
