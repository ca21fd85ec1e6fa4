"""Spatially homogeneous models: host SEIR-C, logistic reservoir SI, and the
host driven by the infected reservoir.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DomainError, InstabilityError

TOL_NEG = 1e-12

MODELS = ("seir", "reservoir", "coupled")
COLUMNS = {
    "seir": ("S", "E", "I", "C", "R"),
    "reservoir": ("theta", "phi", "psi"),
    "coupled": ("S", "E", "I", "C", "R", "theta", "phi", "psi"),
}
_CODES = {"seir": kernels.SEIR, "reservoir": kernels.RESERVOIR, "coupled": kernels.COUPLED}


@dataclass(frozen=True)
class SeirParams:
    """Host rate constants.

    sigma, omega: transmission from infective and contaminated hosts;
    lambda1, lambda2: exposed -> infective / removed;
    gamma1, gamma2: infective -> contaminated / removed;
    mu: contamination decay; kappa: transmission from the infected
    reservoir (0 for an isolated host population).
    """

    sigma: float
    omega: float
    lambda1: float
    lambda2: float
    gamma1: float
    gamma2: float
    mu: float
    kappa: float = 0.0

    def __post_init__(self):
        bad = [k for k in ("sigma", "omega", "lambda1", "lambda2", "gamma1", "gamma2", "mu") if not getattr(self, k) > 0]
        if bad:
            raise DomainError(f"rates must be positive: {', '.join(bad)}")
        if not self.kappa >= 0:
            raise DomainError("kappa must be nonnegative")

    @property
    def lam(self) -> float:
        return self.lambda1 + self.lambda2

    @property
    def gam(self) -> float:
        return self.gamma1 + self.gamma2

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma, self.omega, self.lambda1, self.lambda2,
                         self.gamma1, self.gamma2, self.mu, self.kappa])


@dataclass(frozen=True)
class ReservoirParams:
    beta: float
    m: float
    sigma1: float

    def __post_init__(self):
        bad = [k for k in ("beta", "m", "sigma1") if not getattr(self, k) > 0]
        if bad:
            raise DomainError(f"reservoir rates must be positive: {', '.join(bad)}")

    @property
    def carrying_capacity(self) -> float:
        return self.beta / self.m

    @property
    def reproduction_number(self) -> float:
        return self.sigma1 / self.m

    def as_array(self) -> np.ndarray:
        return np.array([self.beta, self.m, self.sigma1])


class SeirState(NamedTuple):
    S: float
    E: float
    I: float
    C: float
    R: float = 0.0


class ReservoirState(NamedTuple):
    theta: float
    phi: float
    psi: float

    @classmethod
    def from_pair(cls, phi: float, psi: float) -> "ReservoirState":
        return cls(phi + psi, phi, psi)


def _check_nonnegative(values, what):
    arr = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"{what} must be finite and nonnegative, got {tuple(arr)}")
    return arr


def seir_rhs(state, params: SeirParams, psi: float = 0.0) -> np.ndarray:
    """Time derivative ``(dS, dE, dI, dC, dR)``.

    The removed class collects ``lambda2 E + gamma2 I + mu C`` so the five
    components sum to zero.
    """
    S, E, I, C, R = _check_nonnegative(tuple(state) + (0.0,) * (5 - len(state)), "host state")
    if psi < 0:
        raise DomainError("reservoir forcing psi must be nonnegative")
    p = params
    force = p.sigma * I * S + p.omega * S * C + p.kappa * S * psi
    return np.array([
        -force,
        force - p.lam * E,
        p.lambda1 * E - p.gam * I,
        p.gamma1 * I - p.mu * C,
        p.lambda2 * E + p.gamma2 * I + p.mu * C,
    ])


def reservoir_rhs(state, params: ReservoirParams) -> np.ndarray:
    """Time derivative ``(dtheta, dphi, dpsi)``; ``dphi + dpsi == dtheta`` when
    ``theta == phi + psi``."""
    theta, phi, psi = _check_nonnegative(state, "reservoir state")
    b, m, s1 = params.beta, params.m, params.sigma1
    inf = s1 * phi * psi
    return np.array([b * theta - m * theta**2, b * theta - inf - m * theta * phi, inf - m * theta * psi])


@dataclass
class TimeSeries:
    times: np.ndarray
    records: np.ndarray
    columns: tuple[str, ...]
    model: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.records):
            raise ValueError("record count must equal time count")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.records[:, self.columns.index(name)]

    def final(self, name: str | None = None):
        if name is None:
            return dict(zip(self.columns, self.records[-1]))
        return float(self[name][-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("t",) + tuple(self.columns))
            for t, row in zip(self.times, self.records):
                writer.writerow([f"{t:.15g}"] + [f"{v:.15g}" for v in row])


def _pack(model, params, init):
    if model == "seir":
        if not isinstance(params, SeirParams):
            raise TypeError("seir model needs SeirParams")
        y0 = tuple(init) + (0.0,) * (5 - len(init))
        return params.as_array(), np.array(y0, dtype=float)
    if model == "reservoir":
        if not isinstance(params, ReservoirParams):
            raise TypeError("reservoir model needs ReservoirParams")
        init = init if len(init) == 3 else ReservoirState.from_pair(*init)
        return params.as_array(), np.array(init, dtype=float)
    if model == "coupled":
        host, res = params
        h0, r0 = init
        r0 = r0 if len(r0) == 3 else ReservoirState.from_pair(*r0)
        h0 = tuple(h0) + (0.0,) * (5 - len(h0))
        return (np.concatenate([host.as_array(), res.as_array()]),
                np.concatenate([np.asarray(h0, float), np.asarray(r0, float)]))
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def characteristic_rate(model: str, params, init) -> float:
    """Largest linearised rate scale; the default step is 1e-3 of its inverse."""
    p, y0 = _pack(model, params, init)
    rates = []
    if model in ("seir", "coupled"):
        N = float(np.sum(y0[:4]))
        sigma, omega, l1, l2, g1, g2, mu, kappa = p[:8]
        rates += [sigma * N, omega * N, l1 + l2, g1 + g2, mu]
    if model in ("reservoir", "coupled"):
        beta, m, s1 = p[-3:]
        theta = max(beta / m, float(y0[-3]))
        rates += [beta, m * theta, s1 * theta]
        if model == "coupled":
            rates.append(p[7] * theta)
    return max(rates)


def integrate_ode(model: str, params, init, T: float, dt: float | None = None,
                  stride: int | None = None, tol_neg: float = TOL_NEG) -> TimeSeries:
    """Classical RK4 trajectory from ``t = 0`` to ``t = T``.

    ``params`` is :class:`SeirParams`, :class:`ReservoirParams`, or the pair
    ``(SeirParams, ReservoirParams)`` for ``model="coupled"``; ``init`` is the
    matching state (a reservoir state may be given as ``(phi, psi)``). The
    step is shrunk slightly so that ``T`` is hit exactly. ``stride`` is the
    output interval in steps (default: about 1000 outputs).
    """
    p, y0 = _pack(model, params, init)
    _check_nonnegative(y0, "initial state")
    if model in ("reservoir", "coupled") and abs(y0[-3] - y0[-2] - y0[-1]) > 1e-12 * max(1.0, y0[-3]):
        raise DomainError("reservoir initial state needs theta = phi + psi")
    if dt is None:
        dt = 1e-3 / characteristic_rate(model, params, init)
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not T >= dt:
        raise DomainError("horizon T must be at least dt")
    nsteps = max(1, math.ceil(T / dt - 1e-9))
    h = T / nsteps
    if stride is None:
        stride = max(1, nsteps // 1000)
    records, status, fail = kernels.rk4_integrate(_CODES[model], p, y0, h, nsteps, int(stride), tol_neg)
    if status != kernels.OK:
        what = "non-finite value" if status == kernels.NONFINITE else "negative component"
        raise InstabilityError(f"RK4 produced a {what}; reduce dt (currently {h:.3g})", time=fail * h)
    steps = np.arange(0, nsteps + 1, stride)
    if steps[-1] != nsteps:
        steps = np.append(steps, nsteps)
    return TimeSeries(steps * h, records, COLUMNS[model], model,
                      {"params": params, "dt": h, "nsteps": nsteps, "stride": int(stride)})


@dataclass(frozen=True)
class LimitReport:
    """Closed-form long-time limits.

    ``limits`` maps component names to their limit; ``None`` marks a limit
    known only to be positive (the host susceptible level when the reservoir
    cannot sustain the infection).
    """

    regime: str
    limits: dict
    threshold: float | None
    s_star_positive: bool | None = None


def predicted_limits(model: str, params) -> LimitReport:
    if model == "seir":
        return LimitReport("extinction", {"S": None, "E": 0.0, "I": 0.0, "C": 0.0}, None, True)
    res = params if model == "reservoir" else params[1]
    if not isinstance(res, ReservoirParams):
        raise TypeError("reservoir parameters required")
    b, m, s1 = res.beta, res.m, res.sigma1
    ratio = s1 / m
    if s1 <= m:
        regime, phi, psi = "extinction", b / m, 0.0
    else:
        regime, phi, psi = "endemic", b / s1, (b / s1) * (ratio - 1.0)
    limits = {"theta": b / m, "phi": phi, "psi": psi}
    if model == "reservoir":
        return LimitReport(regime, limits, ratio)
    if model != "coupled":
        raise ValueError(f"unknown model {model!r}")
    host = {"S": None if regime == "extinction" else 0.0, "E": 0.0, "I": 0.0, "C": 0.0}
    return LimitReport(regime, {**host, **limits}, ratio, regime == "extinction")


def detect_convergence(ts: TimeSeries, window: int = 10, tol: float = 1e-8) -> float | None:
    """First output time after which ``window`` consecutive outputs all change
    by less than ``tol`` in every component, or ``None``."""
    if len(ts) <= window:
        return None
    change = np.abs(np.diff(ts.records, axis=0)).max(axis=1)
    quiet = change < tol
    run = 0
    for k, q in enumerate(quiet):
        run = run + 1 if q else 0
        if run >= window:
            return float(ts.times[k + 1])
    return None


def observed_order(model: str, params, init, T: float, dt: float) -> float:
    """Convergence order of the final state from runs at dt, dt/2 and dt/4."""
    finals = [integrate_ode(model, params, init, T, dt / 2**k, stride=10**9).records[-1] for k in range(3)]
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    return float(np.log2(e1 / e2))
