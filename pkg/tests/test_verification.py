import pytest

from conftest import SCENARIOS
from epispatial.errors import ConfigError, VerificationFailure
from epispatial.verification import load_suite, require_pass, run_verification


def suite_file(tmp_path, checks, name="probe"):
    text = f"[suite]\nname = {name}\n"
    for cname, body in checks.items():
        text += f"\n[check {cname}]\n" + "".join(f"{k} = {v}\n" for k, v in body.items())
    p = tmp_path / "suite.ini"
    p.write_text(text)
    return p


def check(measure, relation, tolerance, config="reservoir_endemic", **extra):
    return {"theorem": "proposition-2.1", "config": SCENARIOS / f"{config}.ini", "measure": measure,
            "relation": relation, "tolerance": tolerance, **extra}


def test_impossible_tolerance_fails_with_values(tmp_path):
    p = suite_file(tmp_path, {"phi-limit": check("final.phi", "lt", "1e-30", target=1)})
    rep = run_verification(p, tmp_path / "out")
    assert not rep.passed
    line = rep.summary_text().splitlines()[1]
    assert line.startswith("FAIL phi-limit [proposition-2.1]")
    assert "|final.phi - 1.000000e+00| = " in line and "(required lt 1.000000e-30)" in line
    assert "FAIL phi-limit" in (tmp_path / "out" / "summary.txt").read_text()
    with pytest.raises(VerificationFailure, match="phi-limit") as info:
        require_pass(rep)
    assert info.value.exit_code == 5


def test_passing_checks_share_one_run(tmp_path):
    p = suite_file(tmp_path, {"phi": check("final.phi", "lt", "1e-3", target=1),
                              "psi": check("final.psi", "lt", "1e-3", target=1),
                              "short": check("final.psi", "gt", "0", horizon=1)})
    rep = run_verification(p, tmp_path / "out")
    assert rep.passed
    runs = sorted(d.name for d in (tmp_path / "out" / "runs").iterdir())
    assert runs == ["01-reservoir_endemic", "02-reservoir_endemic-T1"]
    assert rep.result("short").value < rep.result("psi").value + 1


def test_empty_suite(tmp_path):
    with pytest.raises(ConfigError, match="no checks defined"):
        load_suite(suite_file(tmp_path, {}))


def test_malformed_checks(tmp_path):
    p = suite_file(tmp_path, {"a": {"theorem": "theorem-1", "measure": "final.S"},
                              "b": check("final.phi", "approx", "1")})
    with pytest.raises(ConfigError) as info:
        load_suite(p)
    msg = str(info.value)
    assert "missing ['config', 'relation', 'tolerance']" in msg and "relation must be one of" in msg


def test_unknown_measure_is_a_failure(tmp_path):
    rep = run_verification(suite_file(tmp_path, {"x": check("final.nonexistent", "lt", "1")}))
    assert not rep.passed and rep.results[0].detail


def test_timeout_reported_as_failure(tmp_path):
    p = suite_file(tmp_path, {"slow": check("final.s", "gt", "0", config="host_spatial", timeout="0.05")})
    rep = run_verification(p)
    assert not rep.passed
    assert rep.results[0].detail.startswith("timeout")


def test_results_are_deterministic(tmp_path):
    p = suite_file(tmp_path, {"phi": check("final.phi", "lt", "1e-3", target=1),
                              "order": check("rk4_order", "ge", "3.8", config="reservoir_rk4")})
    run_verification(p, tmp_path / "a")
    run_verification(p, tmp_path / "b")
    for name in ("results.csv", "summary.txt", "bounds.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
