"""Run configured scenarios, write their artifacts, and sweep parameters."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, ode_problem, simulation_setup, validate
from .errors import ConfigError, EpiSpatialError
from .fieldio import write_field, write_mask
from .grid import CoefficientSpec, extend_by_zero
from .kinetics import detect_convergence, integrate_ode, predicted_limits
from .operators import assemble_diffusion
from .spectral import TOL_LAMBDA, classify, principal_eigenpair
from .steady import endemic_steady, fisher_kpp_steady, verify_attractor

SWEEP_COLUMNS = ("value", "lambda0", "regime", "mean_s", "sup_psi", "error")


def worker_count() -> int:
    """Worker pool size from ``EPISPATIAL_THREADS`` (default 1: run serially)."""
    raw = os.environ.get("EPISPATIAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"EPISPATIAL_THREADS must be an integer, got {raw!r}") from None


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.12g}"
    return str(v)


def format_report(report: dict) -> str:
    lines = []
    for k, v in report.items():
        if k == "lambda0" and isinstance(v, float) and not math.isnan(v):
            lines.append(f"lambda0={v:.12f}")
        else:
            lines.append(f"{k}={format_value(v)}")
    return "\n".join(lines) + "\n"


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


@dataclass
class ScenarioResult:
    """What a scenario produced. ``payload`` holds the in-memory result
    (TimeSeries, SimOutput, EigenResult, SteadyState or EndemicState)."""

    model: str
    report: dict
    payload: object = None
    out_dir: Path | None = None
    extras: dict = field(default_factory=dict)


def _t_label(t: float) -> str:
    return f"{t:g}"


def _write_report(out_dir, report):
    if out_dir is not None:
        (out_dir / "report.txt").write_text(format_report(report))


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> ScenarioResult:
    """Validate ``cfg``, dispatch it and write artifacts under ``out_dir``
    (default: the config's ``[output] dir``; ``None`` there means no files)."""
    if cfg.model == "verify":
        from .verification import run_verification

        suite = cfg.resolve(cfg.suite)
        rep = run_verification(suite, out_dir or cfg.output.get("dir"))
        return ScenarioResult("verify", rep.summary_dict(), rep, rep.out_dir)
    built = validate(cfg)
    if out_dir is None and cfg.output.get("dir"):
        out_dir = cfg.resolve(cfg.output["dir"])
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.model.endswith("-ode"):
        result = _run_ode(cfg, out_dir)
    elif cfg.model.endswith("-pde"):
        result = _run_pde(cfg, built, out_dir)
    elif cfg.model == "eigen":
        result = _run_eigen(cfg, built, out_dir)
    else:
        result = _run_steady(cfg, built, out_dir)
    result.out_dir = out_dir
    _write_report(out_dir, result.report)
    return result


def _run_ode(cfg, out_dir):
    model, params, init, T, dt, stride = ode_problem(cfg)
    ts = integrate_ode(model, params, init, T, dt, stride)
    report = {"model": cfg.model, "t": float(ts.times[-1])}
    if model == "seir":
        report["regime"], report["lambda0"] = "no-reservoir", float("nan")
    else:
        res = params if model == "reservoir" else params[1]
        lam = res.carrying_capacity * (res.sigma1 - res.m)
        report["regime"], report["lambda0"] = classify(lam, TOL_LAMBDA), lam
        report["predicted_regime"] = predicted_limits(model, params).regime
    report.update({k: float(v) for k, v in ts.final().items()})
    report["mean_s"] = ts.final("S") if "S" in ts.columns else float("nan")
    report["sup_psi"] = ts.final("psi") if "psi" in ts.columns else float("nan")
    report["min_value"] = float(ts.records.min())
    if "S" in ts.columns:
        total = ts.records[:, :5].sum(axis=1)
        report["conservation"] = float(np.max(np.abs(total - total[0])) / total[0])
    if "theta" in ts.columns:
        report["sup_theta"] = float(ts["theta"].max())
        report["theta_bound"] = max(float(ts["theta"][0]), res.carrying_capacity)
    conv = detect_convergence(ts)
    report["converged_at"] = "none" if conv is None else conv
    if out_dir is not None:
        ts.to_csv(out_dir / "timeseries.csv")
    return ScenarioResult(cfg.model, report, ts)


def _run_pde(cfg, built, out_dir):
    setup = simulation_setup(cfg, built)
    out = _simulate(setup)
    report = {"model": cfg.model, **out.report}
    report["mean_s"] = float(out.host.s.mean()) if out.host is not None else float("nan")
    report["sup_psi"] = float(out.reservoir.psi.max()) if out.reservoir is not None else float("nan")
    if out_dir is not None:
        out.to_csv(out_dir / "timeseries.csv")
        snap = out_dir / "snapshots"
        snap.mkdir(exist_ok=True)
        for (name, t), values in sorted(out.snapshots.items()):
            write_field(snap / f"{name}_t{_t_label(t)}.txt", values, setup.grid, name, t)
        if built.mask is not None:
            write_mask(out_dir / "mask.txt", built.mask)
    return ScenarioResult(cfg.model, report, out, extras={"setup": setup, "built": built})


def _simulate(setup):
    from .pde import run_simulation

    return run_simulation(setup)


def _region_op(cfg, built, dname):
    return assemble_diffusion(built.coefficients[dname], built.grid, built.mask)


def _full(values, built):
    v = np.asarray(values)
    if built.mask is not None and v.ndim == 1:
        return extend_by_zero(v, built.grid, built.mask)
    return v.reshape(built.grid.shape)


def _run_eigen(cfg, built, out_dir):
    op = _region_op(cfg, built, "d")
    tol = cfg.solver.get("tol", 1e-10)
    eig = principal_eigenpair(op, built.coefficients["a"], tol)
    report = {"model": "eigen", "lambda0": eig.lambda0, "regime": classify(eig.lambda0),
              "residual": eig.residual, "iterations": eig.iterations}
    if out_dir is not None:
        write_field(out_dir / "xi.txt", _full(eig.xi, built), built.grid, "xi")
        if built.mask is not None:
            write_mask(out_dir / "mask.txt", built.mask)
    return ScenarioResult("eigen", report, eig, extras={"op": op, "built": built})


def _run_steady(cfg, built, out_dir):
    c = built.coefficients
    tol = cfg.solver.get("tol", 1e-10)
    att = cfg.attractor
    if cfg.problem == "fisher-kpp":
        op = _region_op(cfg, built, "d")
        ss = fisher_kpp_steady(op, c["a"], c["r"], tol)
        report = {"model": "steady", "problem": "fisher-kpp", "kind": ss.kind, "residual": ss.residual,
                  "iterations": ss.iterations, "lambda0": ss.lambda0,
                  "u_min": float(ss.u.min()), "u_max": float(ss.u.max())}
        fields = {"u": ss.u}
        initial = built.fields.get("v0", np.full(op.n, 0.1))
    else:
        op = _region_op(cfg, built, "d1")
        ss = endemic_steady(c["beta"], c["m"], c["sigma1"], op, tol)
        report = {"model": "steady", "problem": "endemic", "regime": ss.regime, "lambda0": ss.lambda0}
        for name in ("theta", "phi", "psi"):
            a = getattr(ss, name)
            report[f"{name}_min"], report[f"{name}_max"] = float(a.min()), float(a.max())
        report["sum_defect"] = float(np.max(np.abs(ss.phi + ss.psi - ss.theta)))
        fields = {"theta": ss.theta, "phi": ss.phi, "psi": ss.psi}
        theta = op.flat(ss.theta)
        initial = (built.fields.get("phi", 0.5 * theta), built.fields.get("psi", 0.5 * theta))
    attractor = None
    if "T" in att:
        attractor = verify_attractor(ss, initial, att["T"], att.get("dt", 0.01))
        report["attractor_t"] = float(att["T"])
        report["attractor_distance"] = attractor.distance
        report["decay_rate"] = attractor.decay_rate
    if out_dir is not None:
        for name, values in fields.items():
            write_field(out_dir / f"{name}.txt", _full(values, built), built.grid, name)
        if built.mask is not None:
            write_mask(out_dir / "mask.txt", built.mask)
    return ScenarioResult("steady", report, ss, extras={"op": op, "built": built, "attractor": attractor})


# -- sweeps ------------------------------------------------------------------

def sweep_config(cfg: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    """Copy of ``cfg`` with ``param`` (a scalar rate or a constant
    coefficient) set to ``value``."""
    if param in cfg.params:
        return dataclasses.replace(cfg, params={**cfg.params, param: float(value)})
    if param in cfg.coefficients:
        spec = cfg.coefficients[param]
        if spec.kind != "constant":
            raise ConfigError(f"can only sweep constant coefficients; {param} is {spec.kind}")
        return dataclasses.replace(cfg, coefficients={**cfg.coefficients,
                                                      param: CoefficientSpec.constant(float(value))})
    raise ConfigError(f"sweep parameter {param!r} is not in the base config")


def _sweep_row(cfg, param, value, run_dir):
    row = {"value": float(value), "lambda0": float("nan"), "regime": "", "mean_s": float("nan"),
           "sup_psi": float("nan"), "error": ""}
    try:
        rep = run_scenario(sweep_config(cfg, param, value), run_dir).report
    except EpiSpatialError as exc:
        row["regime"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        return row
    row["lambda0"] = float(rep.get("lambda0", float("nan")))
    row["regime"] = rep.get("regime", rep.get("kind", ""))
    row["mean_s"] = float(rep.get("mean_s", float("nan")))
    row["sup_psi"] = float(rep.get("sup_psi", rep.get("psi_max", float("nan"))))
    return row


def run_sweep(cfg: ScenarioConfig, param: str, values, out_dir=None) -> list[dict]:
    """One row per value, ordered by value. Failed runs are recorded in the
    ``error`` column without aborting the sweep."""
    if cfg.model in ("verify",):
        raise ConfigError("cannot sweep a verify config")
    values = sorted(float(v) for v in values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    sweep_config(cfg, param, values[0])
    if out_dir is None and cfg.output.get("dir"):
        out_dir = cfg.resolve(cfg.output["dir"])
    base = dataclasses.replace(cfg, output={k: v for k, v in cfg.output.items() if k != "dir"})
    run_dirs = [None if out_dir is None else Path(out_dir) / "runs" / f"{param}={v:g}" for v in values]
    workers = min(worker_count(), len(values))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, [base] * len(values), [param] * len(values), values, run_dirs))
    else:
        rows = [_sweep_row(base, param, v, d) for v, d in zip(values, run_dirs)]
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_sweep_csv(Path(out_dir) / "sweep.csv", rows)
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([format_value(row[k]) for k in SWEEP_COLUMNS])
