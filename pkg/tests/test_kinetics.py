import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from epispatial.errors import DomainError, InstabilityError
from epispatial.kinetics import (
    ReservoirParams,
    ReservoirState,
    SeirParams,
    SeirState,
    detect_convergence,
    integrate_ode,
    observed_order,
    predicted_limits,
    reservoir_rhs,
    seir_rhs,
)

STANDARD = SeirParams(0.5, 0.5, 0.25, 0.25, 0.5, 0.5, 1.0)
rates = st.floats(0.05, 3.0)
levels = st.floats(0.0, 5.0)


def test_disease_free_equilibrium():
    np.testing.assert_array_equal(seir_rhs(SeirState(1, 0, 0, 0), STANDARD), np.zeros(5))


def test_hand_evaluated_rhs():
    p = SeirParams(1, 1, 0.5, 0.5, 0.5, 0.5, 1.0)
    d = seir_rhs(SeirState(1, 0, 1, 1), p)
    np.testing.assert_allclose(d, [-2.0, 2.0, -1.0, -0.5, 1.5])


def test_reservoir_forcing_enters_force_of_infection():
    p = SeirParams(0.5, 0.5, 0.25, 0.25, 0.5, 0.5, 1.0, kappa=2.0)
    d = seir_rhs(SeirState(1, 0, 0, 0), p, psi=0.5)
    assert d[0] == -1.0 and d[1] == 1.0


def test_reservoir_equilibria():
    p = ReservoirParams(2, 1, 2)
    np.testing.assert_allclose(reservoir_rhs(ReservoirState(2, 2, 0), p), 0, atol=1e-15)
    np.testing.assert_allclose(reservoir_rhs(ReservoirState(2, 1, 1), p), 0, atol=1e-15)


def test_negative_state_rejected():
    with pytest.raises(DomainError):
        seir_rhs(SeirState(-1, 0, 0, 0), STANDARD)


def test_nonpositive_rate_rejected():
    with pytest.raises(DomainError):
        ReservoirParams(2, 0, 1)


@settings(max_examples=100, deadline=None)
@given(rates, rates, rates, rates, rates, rates, rates, st.floats(0, 2), levels, levels, levels, levels, levels)
def test_rhs_sums_to_zero(sg, om, l1, l2, g1, g2, mu, psi, S, E, I, C, R):
    d = seir_rhs(SeirState(S, E, I, C, R), SeirParams(sg, om, l1, l2, g1, g2, mu, kappa=1.0), psi)
    assert abs(d.sum()) <= 1e-12 * (1 + np.abs(d).max())


@settings(max_examples=100, deadline=None)
@given(rates, rates, rates, levels, levels)
def test_reservoir_additivity(b, m, s1, phi, psi):
    d = reservoir_rhs(ReservoirState.from_pair(phi, psi), ReservoirParams(b, m, s1))
    assert d[1] + d[2] == pytest.approx(d[0], abs=1e-12 * (1 + np.abs(d).max()))


def test_disease_free_line_is_invariant():
    ts = integrate_ode("seir", STANDARD, (0.7, 0, 0, 0), 50)
    assert np.all(ts["S"] == 0.7)
    assert np.all(ts.records[:, 1:] == 0)


def test_seir_matches_independent_integrator():
    p, y0 = STANDARD, (1.0, 0.1, 0.01, 0.0)
    ts = integrate_ode("seir", p, y0, 30, dt=0.01, stride=100)

    def f(t, y):
        S, E, I, C, R = y
        force = p.sigma * S * I + p.omega * S * C
        return [-force, force - p.lam * E, p.lambda1 * E - p.gam * I, p.gamma1 * I - p.mu * C,
                p.lambda2 * E + p.gamma2 * I + p.mu * C]

    ref = solve_ivp(f, (0, 30), list(y0) + [0.0], method="DOP853", rtol=1e-12, atol=1e-14, t_eval=ts.times)
    np.testing.assert_allclose(ts.records, ref.y.T, atol=1e-9)


def test_seir_theorem_limits():
    ts = integrate_ode("seir", STANDARD, (1, 0.1, 0.01, 0), 200)
    fin = ts.final()
    assert fin["E"] < 1e-6 and fin["I"] < 1e-6 and fin["C"] < 1e-6 and fin["S"] > 0
    total = ts.records.sum(axis=1)
    assert np.max(np.abs(total - total[0])) / total[0] < 1e-9
    assert np.all(np.diff(ts["S"]) <= 0)
    assert np.all(ts.records >= 0)


def test_reservoir_endemic_limit():
    ts = integrate_ode("reservoir", ReservoirParams(2, 1, 2), (1.5, 0.5), 100)
    assert abs(ts.final("phi") - 1) < 1e-3 and abs(ts.final("psi") - 1) < 1e-3


def test_reservoir_extinction_limit():
    ts = integrate_ode("reservoir", ReservoirParams(3, 1, 0.5), (1.5, 0.5), 100)
    assert ts.final("psi") < 1e-6 and abs(ts.final("phi") - 3) < 1e-3


@settings(max_examples=25, deadline=None)
@given(rates, rates, rates, st.floats(0.01, 4), st.floats(0.01, 4))
def test_reservoir_identity_and_bound(b, m, s1, phi, psi):
    p = ReservoirParams(b, m, s1)
    ts = integrate_ode("reservoir", p, (phi, psi), 20)
    th = ts.records
    assert np.max(np.abs(th[:, 0] - th[:, 1] - th[:, 2])) <= 1e-9 * (phi + psi)
    bound = max(b / m, phi + psi)
    assert th[:, 1:].max() <= bound + 1e-9


def test_coupled_host_collapse():
    ts = integrate_ode("coupled", (SeirParams(0.5, 0.5, 0.25, 0.25, 0.5, 0.5, 1, kappa=1), ReservoirParams(2, 1, 2)),
                       ((1, 0.1, 0.01, 0), (1.5, 0.5)), 200)
    assert ts.final("S") < 1e-4
    assert np.all(np.diff(ts["S"]) <= 0)


def test_coupled_host_survives_below_threshold():
    ts = integrate_ode("coupled", (SeirParams(0.5, 0.5, 0.25, 0.25, 0.5, 0.5, 1, kappa=1), ReservoirParams(2, 1, 0.5)),
                       ((1, 0.1, 0.01, 0), (1.5, 0.5)), 200)
    assert ts.final("S") > 0
    assert max(ts.final("E"), ts.final("I"), ts.final("C")) < 1e-6


def test_coupled_transient_matches_step_doubled_run():
    params = (SeirParams(0.5, 0.5, 0.25, 0.25, 0.5, 0.5, 1, kappa=1), ReservoirParams(2, 1, 2))
    init = ((1, 0.1, 0.01, 0), (1.5, 0.5))
    a = integrate_ode("coupled", params, init, 20, dt=0.01, stride=100)
    b = integrate_ode("coupled", params, init, 20, dt=0.005, stride=200)
    np.testing.assert_allclose(a.records, b.records, atol=1e-9)


def test_predicted_limits():
    assert predicted_limits("reservoir", ReservoirParams(2, 1, 2)).limits["phi"] == 1.0
    rep = predicted_limits("reservoir", ReservoirParams(3, 1, 0.5))
    assert rep.regime == "extinction" and (rep.limits["phi"], rep.limits["psi"]) == (3.0, 0.0)
    at = predicted_limits("reservoir", ReservoirParams(2, 1, 1))
    assert (at.limits["phi"], at.limits["psi"]) == (2.0, 0.0)
    coupled = predicted_limits("coupled", (STANDARD, ReservoirParams(2, 1, 2)))
    assert coupled.limits["S"] == 0.0 and coupled.s_star_positive is False


def test_rk4_order():
    assert observed_order("reservoir", ReservoirParams(2, 1, 2), (1.5, 0.5), 10, 0.2) >= 3.8


def test_time_series_csv(tmp_path):
    ts = integrate_ode("reservoir", ReservoirParams(2, 1, 2), (1.5, 0.5), 1, dt=0.1, stride=5)
    ts.to_csv(tmp_path / "ts.csv")
    lines = (tmp_path / "ts.csv").read_text().splitlines()
    assert lines[0] == "t,theta,phi,psi"
    assert len(lines) == 1 + 3
    assert lines[1] == "0,2,1.5,0.5"


def test_convergence_detection():
    ts = integrate_ode("reservoir", ReservoirParams(2, 1, 2), (1.5, 0.5), 100)
    t = detect_convergence(ts)
    assert t is not None and t < 100


def test_instability_reported():
    with pytest.raises(InstabilityError, match="t="):
        integrate_ode("seir", STANDARD, (1, 0.1, 0.01, 0), 200, dt=50)
