import subprocess
import sys

import pytest

from conftest import SCENARIOS
from epispatial.cli import main


def run(*args):
    return main([str(a) for a in args])


def test_eigen_prints_report(capsys):
    assert run("eigen", SCENARIOS / "eigen_const_3.ini") == 0
    assert "lambda0=3.000000" in capsys.readouterr().out


def test_simulate_writes_outputs(tmp_path, capsys):
    assert run("simulate", SCENARIOS / "seir_extinction.ini", "--out", tmp_path, "--horizon", 5) == 0
    assert "model=seir-ode" in capsys.readouterr().out
    assert (tmp_path / "timeseries.csv").exists() and (tmp_path / "report.txt").exists()


def test_steady(capsys):
    assert run("steady", SCENARIOS / "fisher_kpp_positive.ini", "--tol", 1e-11) == 0
    out = capsys.readouterr().out
    assert "kind=positive" in out and "residual=" in out and "iterations=" in out


def test_sweep_table(capsys):
    assert run("sweep", SCENARIOS / "reservoir_endemic.ini", "--param", "sigma1", "--values", "0.5,1,2") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "value,lambda0,regime,mean_s,sup_psi,error"
    assert [l.split(",")[2] for l in lines[1:]] == ["extinction", "indeterminate", "endemic"]


def test_config_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text((SCENARIOS / "reservoir_endemic.ini").read_text().replace("m = 1", "m = 0"))
    assert run("simulate", bad) == 2
    assert "m must be positive" in capsys.readouterr().err
    assert run("eigen", SCENARIOS / "seir_extinction.ini") == 2


def test_instability_exit_3(capsys):
    assert run("simulate", SCENARIOS / "reservoir_rk4.ini", "--dt", 5) == 3
    assert capsys.readouterr().err.startswith("error:")


def test_solver_failure_exit_4(capsys):
    assert run("steady", SCENARIOS / "fisher_kpp_positive.ini", "--tol", 1e-300) == 4


def test_verification_failure_exit_5(tmp_path, capsys):
    p = tmp_path / "suite.ini"
    p.write_text(f"[suite]\nname = strict\n\n[check phi]\ntheorem = proposition-2.1\n"
                 f"config = {SCENARIOS / 'reservoir_endemic.ini'}\nmeasure = final.phi\n"
                 "relation = lt\ntarget = 1\ntolerance = 1e-30\n")
    assert run("verify", p, "--out", tmp_path / "out") == 5
    assert "FAIL phi" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "epispatial", "eigen", str(SCENARIOS / "eigen_const_neg2.ini")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "regime=extinction" in proc.stdout


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["sweep", str(SCENARIOS / "reservoir_endemic.ini")])
    assert info.value.code == 2
