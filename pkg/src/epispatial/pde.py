"""Spatial dynamics: IMEX stepping of the partially dissipative host system,
the reservoir SI reaction-diffusion system, and their coupling.

Each step advances the reaction terms by explicit Euler and then diffuses
the diffusing components by backward Euler,
``(I/dt - L) u_new = u_reacted / dt``. Fixed points of this map are exactly
the steady states of the spatially discrete system. The infective and
contaminated host classes do not diffuse.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, InstabilityError
from .grid import CellMask, Grid2D, extend_by_zero
from .operators import DiffusionOperator, ShiftedSolver, assemble_diffusion

TOL_NEG = 1e-12

SERIES_COLUMNS = ("t", "int_s", "int_e", "int_i", "int_c", "int_theta", "int_phi", "int_psi",
                  "sup_e", "sup_i", "sup_c", "sup_psi", "s_dev", "cum_psi")


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    T: float
    stride: int = 1
    tol: float = 1e-12
    solver: str = "direct"
    snapshot_times: tuple = ()

    def __post_init__(self):
        errors = []
        if not self.dt > 0:
            errors.append("dt must be positive")
        if not self.T >= self.dt:
            errors.append("horizon T must be at least dt")
        if not 0 < self.tol <= 1e-4:
            errors.append("linear-solve tolerance must lie in (0, 1e-4]")
        if self.stride < 1:
            errors.append("output stride must be >= 1")
        if errors:
            raise ConfigError(errors)

    @property
    def nsteps(self) -> int:
        return max(1, int(np.ceil(self.T / self.dt - 1e-9)))

    @property
    def step(self) -> float:
        """Step actually taken: ``dt`` shrunk so that ``T`` is hit exactly."""
        return self.T / self.nsteps


@dataclass(frozen=True)
class HostCoefficients:
    """Host rate fields. ``sigma``, ``omega`` and ``kappa`` are full-grid
    arrays; the remaining rates are constants."""

    sigma: np.ndarray
    omega: np.ndarray
    kappa: np.ndarray
    lambda1: float
    lambda2: float
    gamma1: float
    gamma2: float
    mu: float

    @property
    def lam(self) -> float:
        return self.lambda1 + self.lambda2

    @property
    def gam(self) -> float:
        return self.gamma1 + self.gamma2


@dataclass
class HostState:
    s: np.ndarray
    e: np.ndarray
    i: np.ndarray
    c: np.ndarray
    t: float = 0.0

    def fields(self) -> dict:
        return {"s": self.s, "e": self.e, "i": self.i, "c": self.c}


@dataclass
class ReservoirFieldState:
    """Reservoir densities as 1-D arrays over the reservoir region."""

    theta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    t: float = 0.0

    def fields(self) -> dict:
        return {"theta": self.theta, "phi": self.phi, "psi": self.psi}


def _guard(arrays, t, what):
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            raise InstabilityError(f"{what}: non-finite {name}; reduce dt", time=t)
        lo = a.min()
        if lo < 0.0:
            if lo < -TOL_NEG:
                raise InstabilityError(f"{what}: {name} went negative ({lo:.3e}); reduce dt", time=t)
            np.maximum(a, 0.0, out=a)


def step_host(state: HostState, coeffs: HostCoefficients, psi_tilde: np.ndarray | None,
              ops: tuple[DiffusionOperator, DiffusionOperator], cfg: StepperConfig,
              solvers: tuple[ShiftedSolver, ShiftedSolver] | None = None) -> HostState:
    """One IMEX step of the host system. ``psi_tilde`` is the infected
    reservoir density extended by zero to the whole grid (``None`` = 0)."""
    dt = cfg.step
    shape = state.s.shape
    if solvers is None:
        solvers = tuple(ShiftedSolver(op, 1.0 / dt, cfg.solver, cfg.tol) for op in ops)
    kpsi = np.zeros(state.s.size) if psi_tilde is None else (coeffs.kappa * psi_tilde).ravel()
    s, e, i, c = kernels.host_reaction(
        state.s.ravel(), state.e.ravel(), state.i.ravel(), state.c.ravel(),
        coeffs.sigma.ravel(), coeffs.omega.ravel(), kpsi,
        coeffs.lambda1, coeffs.lam, coeffs.gamma1, coeffs.gam, coeffs.mu, dt)
    t = state.t + dt
    _guard({"s": s, "e": e, "i": i, "c": c}, t, "host reaction step")
    s = solvers[0].implicit_step(s)
    e = solvers[1].implicit_step(e)
    _guard({"s": s, "e": e}, t, "host diffusion step")
    return HostState(s.reshape(shape), e.reshape(shape), i.reshape(shape), c.reshape(shape), t)


def step_reservoir(state: ReservoirFieldState, coeffs: tuple[np.ndarray, np.ndarray, np.ndarray],
                   op: DiffusionOperator, cfg: StepperConfig,
                   solver: ShiftedSolver | None = None) -> ReservoirFieldState:
    """One IMEX step of the reservoir system; ``coeffs`` is ``(beta, m, sigma1)``
    on the reservoir region."""
    dt = cfg.step
    if solver is None:
        solver = ShiftedSolver(op, 1.0 / dt, cfg.solver, cfg.tol)
    beta, m, sigma1 = coeffs
    th, ph, ps = kernels.reservoir_reaction(state.theta, state.phi, state.psi, beta, m, sigma1, dt)
    t = state.t + dt
    _guard({"theta": th, "phi": ph, "psi": ps}, t, "reservoir reaction step")
    out = solver.implicit_step(np.stack([th, ph, ps]))
    th, ph, ps = out[0], out[1], out[2]
    _guard({"theta": th, "phi": ph, "psi": ps}, t, "reservoir diffusion step")
    return ReservoirFieldState(th, ph, ps, t)


# -- problem setup -------------------------------------------------------------

@dataclass
class HostProblem:
    d2: np.ndarray
    d3: np.ndarray
    coeffs: HostCoefficients
    s0: np.ndarray
    e0: np.ndarray
    i0: np.ndarray
    c0: np.ndarray


@dataclass
class ReservoirProblem:
    """Reservoir data restricted to ``mask`` (whole grid when ``mask`` is None);
    arrays are 1-D over the region."""

    d1: np.ndarray
    beta: np.ndarray
    m: np.ndarray
    sigma1: np.ndarray
    phi0: np.ndarray
    psi0: np.ndarray
    mask: CellMask | None = None

    @property
    def theta_bound(self) -> float:
        """Uniform bound max(||theta0||, ||beta|| / m_min) on the total density."""
        return max(float(np.max(self.phi0 + self.psi0)), float(np.max(self.beta) / np.min(self.m)))


@dataclass
class SimulationSetup:
    grid: Grid2D
    stepper: StepperConfig
    host: HostProblem | None = None
    reservoir: ReservoirProblem | None = None
    s_zero_tol: float = 1e-3
    convergence_window: int = 10
    convergence_tol: float = 1e-8

    @property
    def scenario(self) -> str:
        if self.host is not None and self.reservoir is not None:
            return "coupled"
        if self.host is not None:
            return "host-only"
        if self.reservoir is not None:
            return "reservoir-only"
        raise ConfigError("simulation needs a host or a reservoir block")


def reaction_rate_bound(setup: SimulationSetup) -> float:
    """Crude bound on the largest absolute row sum of the reaction Jacobian
    along the trajectory."""
    rows = [0.0]
    theta_max = setup.reservoir.theta_bound if setup.reservoir is not None else 0.0
    if setup.host is not None:
        h, k = setup.host, setup.host.coeffs
        N = float(np.max(h.s0 + h.e0 + h.i0 + h.c0))
        sg, om, kp = float(np.max(k.sigma)), float(np.max(k.omega)), float(np.max(k.kappa))
        s_row = 2 * sg * N + 2 * om * N + kp * (theta_max + N)
        rows += [s_row, s_row + k.lam, k.lambda1 + k.gam, k.gamma1 + k.mu]
    if setup.reservoir is not None:
        r = setup.reservoir
        b, m, s1 = float(np.max(r.beta)), float(np.max(r.m)), float(np.max(r.sigma1))
        rows += [b + 2 * m * theta_max, b + 2 * (m + s1) * theta_max]
    return max(rows)


def validate_setup(setup: SimulationSetup) -> None:
    errors = []
    grid = setup.grid
    if setup.host is not None:
        h = setup.host
        for name in ("d2", "d3", "s0", "e0", "i0", "c0"):
            if getattr(h, name).shape != grid.shape:
                errors.append(f"host field {name} does not match the grid")
        for name in ("s0", "e0", "i0", "c0"):
            if np.any(getattr(h, name) < 0):
                errors.append(f"initial {name} must be nonnegative")
        for name in ("d2", "d3"):
            if np.any(getattr(h, name) <= 0):
                errors.append(f"{name} must be positive")
        for name in ("sigma", "omega"):
            if np.any(getattr(h.coeffs, name) <= 0):
                errors.append(f"{name} must be positive")
        if np.any(h.coeffs.kappa < 0):
            errors.append("kappa must be nonnegative")
    if setup.reservoir is not None:
        r = setup.reservoir
        n = grid.n_cells if r.mask is None else r.mask.cell_count
        for name in ("d1", "beta", "m", "sigma1", "phi0", "psi0"):
            if getattr(r, name).shape != (n,):
                errors.append(f"reservoir field {name} does not match the reservoir region")
        for name in ("d1", "beta", "m", "sigma1"):
            if np.any(getattr(r, name) <= 0):
                errors.append(f"{name} must be positive")
        for name in ("phi0", "psi0"):
            if np.any(getattr(r, name) < 0):
                errors.append(f"initial {name} must be nonnegative")
    if setup.host is not None and setup.reservoir is not None:
        mask = setup.reservoir.mask
        if mask is None or not mask.is_proper:
            errors.append("coupled runs need Omega_star to be a proper subregion (mask)")
        elif np.any(setup.host.coeffs.kappa[~mask.membership] != 0):
            errors.append("kappa must vanish off Omega_star")
    if not errors:
        bound = reaction_rate_bound(setup)
        if setup.stepper.step * bound > 0.5:
            errors.append(f"dt={setup.stepper.step:.4g} too large for the explicit reaction step: "
                          f"need dt * {bound:.4g} <= 0.5")
    if errors:
        raise ConfigError(errors)


@dataclass
class SimOutput:
    scenario: str
    times: np.ndarray
    series: np.ndarray
    snapshots: dict
    host: HostState | None
    reservoir: ReservoirFieldState | None
    report: dict = field(default_factory=dict)
    min_value: float = 0.0
    sup_theta: float = 0.0
    theta_bound: float = 0.0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.series[:, SERIES_COLUMNS.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SERIES_COLUMNS)
            for row in self.series:
                writer.writerow([f"{v:.15g}" for v in row])


def _region_integral(f: np.ndarray, grid: Grid2D) -> float:
    return float(f.sum()) * grid.cell_area


def run_simulation(setup: SimulationSetup, classify: bool = True) -> SimOutput:
    """Advance host and/or reservoir on a shared clock.

    The reservoir evolves without feedback from the host; its infected
    density, extended by zero off the reservoir region, enters the host
    force of infection through ``kappa``.
    """
    validate_setup(setup)
    grid, cfg = setup.grid, setup.stepper
    dt, nsteps = cfg.step, cfg.nsteps

    host = res = None
    host_solvers = res_solver = None
    if setup.host is not None:
        hp = setup.host
        ops = (assemble_diffusion(hp.d2, grid), assemble_diffusion(hp.d3, grid))
        host_solvers = tuple(ShiftedSolver(op, 1.0 / dt, cfg.solver, cfg.tol) for op in ops)
        host = HostState(*(np.array(a, dtype=float) for a in (hp.s0, hp.e0, hp.i0, hp.c0)))
    if setup.reservoir is not None:
        rp = setup.reservoir
        res_op = assemble_diffusion(rp.d1, grid, rp.mask)
        res_solver = ShiftedSolver(res_op, 1.0 / dt, cfg.solver, cfg.tol)
        res = ReservoirFieldState(rp.phi0 + rp.psi0, np.array(rp.phi0, float), np.array(rp.psi0, float))
        res_coeffs = (rp.beta, rp.m, rp.sigma1)

    snap_steps = {}
    for ts in cfg.snapshot_times:
        k = int(round(float(ts) / dt))
        if 0 <= k <= nsteps:
            snap_steps.setdefault(k, float(ts))
    snapshots = {}

    def psi_tilde():
        if res is None:
            return None
        if setup.reservoir.mask is None:
            return res.psi.reshape(grid.shape)
        return extend_by_zero(res.psi, grid, setup.reservoir.mask)

    def psi_integral():
        return 0.0 if res is None else _region_integral(res.psi, grid)

    cum_psi = 0.0
    stats = {"min": np.inf, "sup_theta": 0.0}

    def record(t):
        row = [t]
        if host is not None:
            row += [_region_integral(getattr(host, k), grid) for k in "seic"]
        else:
            row += [0.0] * 4
        if res is not None:
            row += [_region_integral(res.theta, grid), _region_integral(res.phi, grid), psi_integral()]
        else:
            row += [0.0] * 3
        if host is not None:
            row += [float(host.e.max()), float(host.i.max()), float(host.c.max())]
        else:
            row += [0.0] * 3
        row.append(float(res.psi.max()) if res is not None else 0.0)
        row.append(float(np.max(np.abs(host.s - host.s.mean()))) if host is not None else 0.0)
        row.append(cum_psi)
        for st in (host, res):
            if st is not None:
                stats["min"] = min(stats["min"], min(float(a.min()) for a in st.fields().values()))
        if res is not None:
            stats["sup_theta"] = max(stats["sup_theta"], float(res.theta.max()))
        return row

    def snapshot(t):
        if host is not None:
            for name, a in host.fields().items():
                snapshots[(name, t)] = a.copy()
        if res is not None:
            for name, a in res.fields().items():
                full = a.reshape(grid.shape) if setup.reservoir.mask is None else extend_by_zero(a, grid, setup.reservoir.mask)
                snapshots[(name, t)] = full

    rows = [record(0.0)]
    if 0 in snap_steps:
        snapshot(0.0)
    for k in range(1, nsteps + 1):
        t = k * dt
        before = psi_integral()
        if host is not None:
            host = step_host(host, setup.host.coeffs, psi_tilde(), None, cfg, host_solvers)
        if res is not None:
            res = step_reservoir(res, res_coeffs, None, cfg, res_solver)
        cum_psi += 0.5 * dt * (before + psi_integral())
        if host is not None:
            host.t = t
        if res is not None:
            res.t = t
        if k % cfg.stride == 0 or k == nsteps:
            rows.append(record(t))
        if k in snap_steps:
            snapshot(snap_steps[k])
    if ("s" if host is not None else "theta", cfg.T) not in snapshots:
        snapshot(cfg.T)

    series = np.array(rows)
    out = SimOutput(setup.scenario, series[:, 0], series, snapshots, host, res,
                    min_value=float(stats["min"]), sup_theta=stats["sup_theta"],
                    theta_bound=setup.reservoir.theta_bound if setup.reservoir is not None else 0.0)
    out.report = _final_report(setup, out, classify)
    return out


def _final_report(setup: SimulationSetup, out: SimOutput, classify: bool) -> dict:
    report = {"scenario": out.scenario, "t": setup.stepper.T}
    if setup.reservoir is not None and classify:
        from .spectral import threshold_report
        from .steady import fisher_kpp_steady

        rp = setup.reservoir
        op = assemble_diffusion(rp.d1, setup.grid, rp.mask)
        theta_star = fisher_kpp_steady(op, rp.beta, rp.m).u.ravel()
        thr = threshold_report(theta_star, rp.sigma1, rp.m, op)
        report["regime"] = thr.regime
        report["lambda0"] = thr.lambda0
    else:
        report["regime"] = "no-reservoir" if setup.reservoir is None else "unclassified"
        report["lambda0"] = float("nan")
    if out.host is not None:
        s = out.host.s
        report["s_star"] = 0.0 if s.max() < setup.s_zero_tol else float(s.mean())
    else:
        report["s_star"] = float("nan")
    w = setup.convergence_window
    if len(out.series) > w:
        tail = out.series[-(w + 1):, 1:]
        report["converged"] = bool(np.abs(np.diff(tail, axis=0)[:, :-1]).max() < setup.convergence_tol)
    else:
        report["converged"] = False
    report["min_value"] = out.min_value
    if out.reservoir is not None:
        report["sup_theta"] = out.sup_theta
        report["theta_bound"] = out.theta_bound
    return report
