"""Theorem-verification harness driven by suite files.

A suite is an INI file::

    [suite]
    name = default

    [check seir-exposed]
    theorem = theorem-1             ; id of the result being checked
    config = scenarios/seir.ini     ; relative to the suite file
    measure = final.E
    relation = lt                   ; lt | le | gt | ge
    target = 0                      ; optional: compare |measured - target|
    tolerance = 1e-6
    horizon = 200                   ; optional override of the run horizon
    timeout = 60                    ; seconds

Checks sharing a config and horizon share one scenario run. Results go to
``results.csv`` and ``summary.txt``; both are deterministic (no timings).
"""

from __future__ import annotations

import configparser
import csv
import math
import signal
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigError, EpiSpatialError, VerificationFailure
from .grid import build_grid
from .kinetics import integrate_ode, observed_order
from .operators import assemble_diffusion
from .pde import SERIES_COLUMNS
from .scenarios import ScenarioResult, format_value, run_scenario, worker_count
from .steady import endemic_steady

RELATIONS = {"lt": lambda v, t: v < t, "le": lambda v, t: v <= t,
             "gt": lambda v, t: v > t, "ge": lambda v, t: v >= t}
RESULT_COLUMNS = ("check", "theorem", "measure", "relation", "target", "tolerance", "measured", "value",
                  "passed", "detail")
DEFAULT_TIMEOUT = 120.0


@dataclass(frozen=True)
class Check:
    name: str
    theorem: str
    config: Path
    measure: str
    relation: str
    tolerance: float
    target: float | None = None
    horizon: float | None = None
    timeout: float = DEFAULT_TIMEOUT


@dataclass(frozen=True)
class VerificationSuite:
    name: str
    path: Path
    checks: tuple[Check, ...]


@dataclass
class CheckResult:
    check: Check
    measured: float
    value: float
    passed: bool
    detail: str = ""

    def row(self) -> dict:
        c = self.check
        return {"check": c.name, "theorem": c.theorem, "measure": c.measure, "relation": c.relation,
                "target": "" if c.target is None else _num(c.target), "tolerance": _num(c.tolerance),
                "measured": _num(self.measured), "value": _num(self.value),
                "passed": "true" if self.passed else "false", "detail": self.detail}


@dataclass
class RunBounds:
    """Bounds observed in one scenario run of the suite."""

    run: str
    min_value: float
    theta_excess: float


@dataclass
class VerificationReport:
    suite: VerificationSuite
    results: list
    runs: list = field(default_factory=list)
    out_dir: Path | None = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    def result(self, name: str) -> CheckResult:
        for r in self.results:
            if r.check.name == name:
                return r
        raise KeyError(name)

    def summary_dict(self) -> dict:
        return {"suite": self.suite.name, "checks": len(self.results),
                "passed": len(self.results) - len(self.failures), "failed": len(self.failures)}

    def summary_text(self) -> str:
        lines = [f"suite {self.suite.name}: {len(self.results) - len(self.failures)}/{len(self.results)} checks passed"]
        for r in self.results:
            c = r.check
            status = "PASS" if r.passed else "FAIL"
            what = f"|{c.measure} - {_num(c.target)}|" if c.target is not None else c.measure
            line = (f"{status} {c.name} [{c.theorem}] {what} = {_num(r.value)} "
                    f"(required {c.relation} {_num(c.tolerance)})")
            if r.detail:
                line += f" {r.detail}"
            lines.append(line)
        return "\n".join(lines) + "\n"


def _num(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{float(x):.6e}"


# -- loading -----------------------------------------------------------------

def load_suite(path) -> VerificationSuite:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read suite {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    name = parser.get("suite", "name", fallback=path.stem)
    checks, errors = [], []
    required = {"theorem", "config", "measure", "relation", "tolerance"}
    optional = {"target", "horizon", "timeout"}
    for section in parser.sections():
        if section == "suite":
            continue
        head, _, cname = section.partition(" ")
        if head != "check" or not cname.strip():
            errors.append(f"unknown section [{section}]")
            continue
        d = dict(parser.items(section))
        missing = sorted(required - set(d))
        extra = sorted(set(d) - required - optional)
        if missing or extra:
            errors.append(f"[{section}] missing {missing} unexpected {extra}")
            continue
        if d["relation"] not in RELATIONS:
            errors.append(f"[{section}] relation must be one of {sorted(RELATIONS)}")
            continue
        try:
            checks.append(Check(cname.strip(), d["theorem"], path.parent / d["config"], d["measure"],
                                d["relation"], float(d["tolerance"]),
                                float(d["target"]) if "target" in d else None,
                                float(d["horizon"]) if "horizon" in d else None,
                                float(d.get("timeout", DEFAULT_TIMEOUT))))
        except ValueError as exc:
            errors.append(f"[{section}] {exc}")
    if errors:
        raise ConfigError(errors)
    if not checks:
        raise ConfigError("no checks defined")
    return VerificationSuite(name, path, tuple(checks))


# -- measures ----------------------------------------------------------------

class CheckTimeout(Exception):
    pass


@contextmanager
def time_limit(seconds: float):
    """Raise :class:`CheckTimeout` after ``seconds`` of wall time (main
    thread only; a no-op elsewhere)."""
    try:
        old = signal.signal(signal.SIGALRM, _alarm)
    except ValueError:
        yield
        return
    signal.setitimer(signal.ITIMER_REAL, seconds)
    try:
        yield
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, old)


def _alarm(signum, frame):
    raise CheckTimeout()


def _series(res: ScenarioResult, col: str) -> np.ndarray:
    p = res.payload
    columns = p.columns if res.model.endswith("-ode") else SERIES_COLUMNS
    if col not in columns:
        raise ConfigError(f"no time-series column {col!r} for model {res.model}")
    return p[col]


def measure(name: str, res: ScenarioResult) -> float:
    """Evaluate measure ``name`` on a finished scenario."""
    kind, _, arg = name.partition(".")
    rep, p = res.report, res.payload
    if kind == "final":
        return float(_series(res, arg)[-1])
    if kind in ("min", "max"):
        s = _series(res, arg)
        return float(s.min() if kind == "min" else s.max())
    if kind == "max_increase":
        return float(max(0.0, np.max(np.diff(_series(res, arg)))))
    if kind == "report":
        return float(rep[arg])
    if name in ("min_value", "conservation", "lambda0", "mean_s", "s_star", "sup_psi", "residual",
                "attractor_distance", "decay_rate", "u_min", "u_max", "theta_min", "theta_max",
                "phi_min", "phi_max", "psi_min", "psi_max", "sum_defect"):
        return float(rep[name])
    if name == "host_total_increase":
        total = sum(p[c] for c in ("int_s", "int_e", "int_i", "int_c"))
        return float(max(0.0, np.max(np.diff(total))))
    if name == "theta_excess":
        return _theta_excess(res)
    if name == "sup_s":
        return float(p.host.s.max())
    if name == "cum_psi_tail":
        cum, t = p["cum_psi"], p.times
        total = cum[-1]
        if total == 0:
            return 0.0
        return float((total - np.interp(0.9 * t[-1], t, cum)) / total)
    if name in ("psi_distance", "phi_distance"):
        return _steady_distance(res, name[:3])
    if name == "ode_consistency":
        return _ode_consistency(res)
    if name == "rk4_order":
        md = res.payload.metadata
        params = md["params"]
        init = _ode_init(res)
        return observed_order(p.model, params, init, float(p.times[-1]), md["dt"])
    if name == "mms_order":
        return _mms_order(res)
    if name == "dense_error":
        op, a = res.extras["op"], res.extras["built"].coefficients["a"]
        A = op.matrix.toarray() + np.diag(op.flat(a))
        return float(abs(np.linalg.eigvalsh(A)[-1] - p.lambda0))
    if name == "xi_variation":
        xi = np.asarray(p.xi)
        return float((xi.max() - xi.min()) / xi.max())
    if name == "eigen_residual":
        return float(p.residual)
    raise ConfigError(f"unknown measure {name!r}")


def _ode_init(res):
    y0 = tuple(float(v) for v in res.payload.records[0])
    return (y0[:5], y0[5:]) if res.payload.model == "coupled" else y0


def _theta_excess(res: ScenarioResult) -> float:
    rep = res.report
    if "sup_theta" not in rep:
        return 0.0
    return max(0.0, float(rep["sup_theta"]) / float(rep["theta_bound"]) - 1.0)


def _steady_distance(res, which):
    out, setup = res.payload, res.extras["setup"]
    rp = setup.reservoir
    op = assemble_diffusion(rp.d1, setup.grid, rp.mask)
    ss = endemic_steady(rp.beta, rp.m, rp.sigma1, op)
    target = op.flat(getattr(ss, which))
    return float(np.max(np.abs(getattr(out.reservoir, which) - target)))


def _ode_consistency(res) -> float:
    """Max difference between PDE spatial means and the matching ODE run
    (constant coefficients, uniform data)."""
    from .kinetics import ReservoirParams, SeirParams

    out, setup = res.payload, res.extras["setup"]
    grid, T = setup.grid, setup.stepper.T
    area = grid.area
    errs = []
    fine = setup.stepper.step / 20

    def const(x, what):
        x = np.asarray(x)
        if np.ptp(x) > 1e-14 * max(1.0, abs(x).max()):
            raise ConfigError(f"ode_consistency needs constant {what}")
        return float(x.flat[0])

    if setup.host is not None:
        if setup.reservoir is not None:
            raise ConfigError("ode_consistency is defined for host-only or reservoir-only runs")
        h, k = setup.host, setup.host.coeffs
        params = SeirParams(const(k.sigma, "sigma"), const(k.omega, "omega"), k.lambda1, k.lambda2,
                            k.gamma1, k.gamma2, k.mu)
        init = tuple(const(getattr(h, f), f) for f in ("s0", "e0", "i0", "c0"))
        ts = integrate_ode("seir", params, init, T, fine, stride=1)
        for col, name in zip("SEIC", ("int_s", "int_e", "int_i", "int_c")):
            errs.append(np.max(np.abs(out[name] / area - np.interp(out.times, ts.times, ts[col]))))
    if setup.reservoir is not None:
        rp = setup.reservoir
        params = ReservoirParams(const(rp.beta, "beta"), const(rp.m, "m"), const(rp.sigma1, "sigma1"))
        init = (const(rp.phi0, "phi0"), const(rp.psi0, "psi0"))
        ts = integrate_ode("reservoir", params, init, T, fine, stride=1)
        region = area if rp.mask is None else rp.mask.area
        for col in ("theta", "phi", "psi"):
            errs.append(np.max(np.abs(out["int_" + col] / region - np.interp(out.times, ts.times, ts[col]))))
    return float(max(errs))


def _mms_order(res) -> float:
    """Observed order of the diffusion operator's truncation error on
    ``u = cos(pi x / lx) cos(pi y / ly)`` between the configured grid and its
    refinement, with the constant diffusivity of the config."""
    built = res.extras["built"]
    g = built.grid
    d = np.asarray(built.coefficients["d"])
    if np.ptp(d) > 0:
        raise ConfigError("mms_order needs a constant diffusivity")
    d = float(d.flat[0])
    errs = []
    for k in (1, 2):
        grid = build_grid(g.lx, g.ly, g.nx * k, g.ny * k, g.x0, g.y0)
        X, Y = grid.centers()
        u = np.cos(np.pi * (X - g.x0) / g.lx) * np.cos(np.pi * (Y - g.y0) / g.ly)
        exact = -d * np.pi**2 * (1 / g.lx**2 + 1 / g.ly**2) * u
        op = assemble_diffusion(np.full(grid.shape, d), grid)
        errs.append(np.max(np.abs(op.matvec(u.ravel()) - exact.ravel())))
    return float(np.log2(errs[0] / errs[1]))


# -- running -----------------------------------------------------------------

def _group_key(check: Check):
    return (str(check.config), check.horizon)


def _run_group(checks, run_dir):
    """Run one scenario and evaluate its checks. Returns (results, bounds)."""
    first = checks[0]
    timeout = max(c.timeout for c in checks)
    results = []
    try:
        cfg = load_config(first.config)
        if first.horizon is not None:
            cfg = cfg.with_overrides(horizon=first.horizon)
        with time_limit(timeout):
            res = run_scenario(cfg, run_dir)
    except CheckTimeout:
        detail = f"timeout: scenario exceeded {timeout:g}s"
        return [CheckResult(c, math.nan, math.nan, False, detail) for c in checks], None
    except EpiSpatialError as exc:
        detail = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
        return [CheckResult(c, math.nan, math.nan, False, detail) for c in checks], None
    for c in checks:
        try:
            with time_limit(c.timeout):
                m = measure(c.measure, res)
        except CheckTimeout:
            results.append(CheckResult(c, math.nan, math.nan, False, f"timeout: measure exceeded {c.timeout:g}s"))
            continue
        except (EpiSpatialError, KeyError, ValueError) as exc:
            results.append(CheckResult(c, math.nan, math.nan, False,
                                       f"error: {type(exc).__name__}: {exc}".replace("\n", " ")))
            continue
        value = abs(m - c.target) if c.target is not None else m
        ok = bool(np.isfinite(value)) and RELATIONS[c.relation](value, c.tolerance)
        detail = "" if ok else f"measured {_num(value)} not {c.relation} {_num(c.tolerance)}"
        results.append(CheckResult(c, m, value, ok, detail))
    bounds = RunBounds(run_dir.name if run_dir is not None else first.config.stem,
                       _bounds_min(res), _theta_excess(res))
    return results, bounds


def _bounds_min(res) -> float:
    m = res.report.get("min_value")
    if m is not None:
        return float(m)
    p = res.payload
    vals = [np.min(getattr(p, k)) for k in ("u", "theta", "phi", "psi", "xi") if hasattr(p, k)]
    return float(min(vals)) if vals else math.nan


def run_verification(suite_path, out_dir=None) -> VerificationReport:
    """Execute every check in the suite. Artifacts of each scenario run go
    to ``out_dir/runs/<n>-<config>``; results to ``results.csv`` and
    ``summary.txt``."""
    suite = load_suite(suite_path)
    groups: dict = {}
    for c in suite.checks:
        groups.setdefault(_group_key(c), []).append(c)
    keys = list(groups)
    out = Path(out_dir) if out_dir is not None else None
    run_dirs = []
    for n, key in enumerate(keys, 1):
        stem = Path(key[0]).stem + ("" if key[1] is None else f"-T{key[1]:g}")
        run_dirs.append(None if out is None else out / "runs" / f"{n:02d}-{stem}")
    workers = min(worker_count(), len(keys))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_group, [groups[k] for k in keys], run_dirs))
    else:
        outcomes = [_run_group(groups[k], d) for k, d in zip(keys, run_dirs)]
    by_name = {}
    runs = []
    for results, bounds in outcomes:
        for r in results:
            by_name[r.check.name] = r
        if bounds is not None:
            runs.append(bounds)
    report = VerificationReport(suite, [by_name[c.name] for c in suite.checks], runs, out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RESULT_COLUMNS)
            for r in report.results:
                row = r.row()
                writer.writerow([row[k] for k in RESULT_COLUMNS])
        (out / "summary.txt").write_text(report.summary_text())
        with open(out / "bounds.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("run", "min_value", "theta_excess"))
            for b in runs:
                writer.writerow((b.run, format_value(b.min_value), format_value(b.theta_excess)))
    return report


def require_pass(report: VerificationReport) -> None:
    if not report.passed:
        names = ", ".join(r.check.name for r in report.failures)
        raise VerificationFailure(f"{len(report.failures)} check(s) failed: {names}")
