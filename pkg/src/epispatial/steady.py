"""Steady states of the diffusive logistic (Fisher-KPP) equation and of the
reservoir SI system, plus checks that the dynamics are attracted to them.

Positive steady states are found by pseudo-time marching of the dynamic
equation (the same IMEX scheme as the simulators) until the step change is
small, then polished by Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import kernels
from .errors import DegenerateThresholdError, SolverError
from .operators import DiffusionOperator, ShiftedSolver
from .pde import ReservoirFieldState, StepperConfig, step_reservoir
from .spectral import TOL_LAMBDA, classify, principal_eigenpair

SEED_OFFSET = 1e-3
MARCH_TOL = 1e-4


@dataclass(frozen=True)
class SteadyState:
    """Solution of ``L u + a u - r u^2 = 0``. ``kind`` is ``positive`` or
    ``trivial`` (u = 0)."""

    u: np.ndarray
    kind: str
    residual: float
    iterations: int
    lambda0: float
    op: DiffusionOperator = field(repr=False)
    a: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)

    def as_text(self) -> str:
        return (f"kind={self.kind}\nresidual={self.residual:.6e}\niterations={self.iterations}\n"
                f"lambda0={self.lambda0:.12f}\n")


def logistic_residual(op: DiffusionOperator, a, r, u) -> np.ndarray:
    u = op.flat(u)
    return op.matrix @ u + op.flat(a) * u - op.flat(r) * u * u


def _newton(op, a, r, u, target, maxiter=30):
    L = op.matrix
    for k in range(maxiter):
        F = L @ u + a * u - r * u * u
        if np.max(np.abs(F)) <= target:
            return u, k
        J = (L + sp.diags(a - 2.0 * r * u)).tocsc()
        u_new = u - spsolve(J, F)
        if not np.all(np.isfinite(u_new)) or u_new.min() <= 0:
            return None, k
        u = u_new
    F = L @ u + a * u - r * u * u
    return (u, maxiter) if np.max(np.abs(F)) <= target else (None, maxiter)


def _march(op, a, r, u, dt, stop, max_steps, solver):
    for k in range(1, max_steps + 1):
        v = solver.implicit_step(kernels.logistic_reaction(u, a, r, dt))
        change = float(np.max(np.abs(v - u))) / dt
        u = v
        if change < stop:
            return u, k
    return u, max_steps


def fisher_kpp_steady(op: DiffusionOperator, a, r, tol: float = 1e-10, u0=None,
                      tol_lambda: float = TOL_LAMBDA, max_steps: int = 200_000,
                      newton: bool = True) -> SteadyState:
    """Solve ``-div(d grad u) = a u - r u^2`` with zero-flux boundaries.

    Returns the positive solution when the principal eigenvalue of
    ``L + diag(a)`` is positive and the trivial one when it is negative;
    raises :class:`DegenerateThresholdError` inside the dead band.
    """
    a, r = op.flat(a), op.flat(r)
    if np.any(r <= 0):
        raise ValueError("saturation coefficient r must be positive")
    lam = principal_eigenpair(op, a).lambda0
    regime = classify(lam, tol_lambda)
    if regime == "indeterminate":
        raise DegenerateThresholdError(f"threshold degenerate: principal eigenvalue {lam:.3e} within dead band")
    if regime == "extinction":
        u = np.zeros(op.n)
        return SteadyState(op.unflat(u), "trivial", 0.0, 0, lam, op, op.unflat(a), op.unflat(r))

    u = np.maximum(a, 0.0) / r + SEED_OFFSET if u0 is None else op.flat(u0).astype(float)
    if np.any(u <= 0):
        raise ValueError("initial profile must be strictly positive")
    vmax = max(float(u.max()), float(np.abs(a).max() / r.min()))
    dt = 0.5 / (float(r.max()) * vmax + float(np.abs(a).max()))
    solver = ShiftedSolver(op, 1.0 / dt)
    target = tol * (1.0 + float(np.abs(a).max()) * vmax)

    u, steps = _march(op, a, r, u, dt, MARCH_TOL, max_steps, solver)
    polished = None
    if newton:
        polished, nk = _newton(op, a, r, u, target)
        steps += nk
    if polished is None:
        u, more = _march(op, a, r, u, dt, tol, max_steps, solver)
        steps += more
    else:
        u = polished
    res = float(np.max(np.abs(logistic_residual(op, a, r, u))))
    if res > target:
        raise SolverError("Fisher-KPP steady state did not converge", residual=res)
    if u.min() <= 0:
        raise SolverError("positive steady state has a nonpositive cell (internal error)")
    return SteadyState(op.unflat(u), "positive", res, steps, lam, op, op.unflat(a), op.unflat(r))


@dataclass(frozen=True)
class EndemicState:
    theta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    regime: str
    lambda0: float
    op: DiffusionOperator = field(repr=False)
    beta: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)
    sigma1: np.ndarray = field(repr=False)

    def as_text(self) -> str:
        return f"regime={self.regime}\nlambda0={self.lambda0:.12f}\n"


def endemic_steady(beta, m, sigma1, op: DiffusionOperator, tol: float = 1e-10) -> EndemicState:
    """Steady state of the reservoir system.

    The total density solves the logistic problem with growth ``beta`` and
    saturation ``m``; the infected density then solves the logistic problem
    with growth ``theta* (sigma1 - m)`` and saturation ``sigma1``.
    """
    beta, m, sigma1 = (op.flat(v) for v in (beta, m, sigma1))
    theta = fisher_kpp_steady(op, beta, m, tol).u.ravel()
    R = theta * (sigma1 - m)
    ss = fisher_kpp_steady(op, R, sigma1, tol)
    psi = ss.u.ravel()
    phi = theta - psi
    if phi.min() < -1e-10 * theta.max():
        raise SolverError("endemic state has negative uninfected density (internal error)")
    phi = np.maximum(phi, 0.0)
    regime = "endemic" if ss.kind == "positive" else "extinction"
    return EndemicState(op.unflat(theta), op.unflat(phi), op.unflat(psi), regime, ss.lambda0,
                        op, op.unflat(beta), op.unflat(m), op.unflat(sigma1))


@dataclass(frozen=True)
class AttractorReport:
    times: np.ndarray
    distances: np.ndarray
    distance: float
    decay_rate: float

    def as_text(self) -> str:
        return f"distance={self.distance:.6e}\ndecay_rate={self.decay_rate:.6f}\n"


def fitted_decay_rate(times: np.ndarray, distances: np.ndarray) -> float:
    """Least-squares exponential rate of ``distances`` over the final half."""
    keep = (times >= times[-1] / 2) & (distances > 0)
    if keep.sum() < 2:
        return float("nan")
    slope = np.polyfit(times[keep], np.log(distances[keep]), 1)[0]
    return float(-slope)


def verify_attractor(steady: SteadyState | EndemicState, initial, T: float, dt: float) -> AttractorReport:
    """Run the dynamic system from ``initial`` and measure its sup-norm
    distance to ``steady``.

    ``initial`` is ``v0`` for a Fisher-KPP state or ``(phi0, psi0)`` for an
    endemic state.
    """
    op = steady.op
    cfg = StepperConfig(dt=dt, T=T)
    h, n = cfg.step, cfg.nsteps
    solver = ShiftedSolver(op, 1.0 / h)
    dist = np.empty(n + 1)
    if isinstance(steady, SteadyState):
        a, r, u = op.flat(steady.a), op.flat(steady.r), op.flat(steady.u)
        v = op.flat(initial).astype(float)
        dist[0] = np.max(np.abs(v - u))
        for k in range(1, n + 1):
            v = solver.implicit_step(kernels.logistic_reaction(v, a, r, h))
            dist[k] = np.max(np.abs(v - u))
    else:
        phi0, psi0 = (op.flat(x).astype(float) for x in initial)
        coeffs = tuple(op.flat(x) for x in (steady.beta, steady.m, steady.sigma1))
        st = ReservoirFieldState(phi0 + psi0, phi0, psi0)
        phis, psis = op.flat(steady.phi), op.flat(steady.psi)

        def d(s):
            return max(np.max(np.abs(s.phi - phis)), np.max(np.abs(s.psi - psis)))

        dist[0] = d(st)
        for k in range(1, n + 1):
            st = step_reservoir(st, coeffs, op, cfg, solver)
            dist[k] = d(st)
    times = np.arange(n + 1) * h
    return AttractorReport(times, dist, float(dist[-1]), fitted_decay_rate(times, dist))
