"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration, 3 numerical instability,
4 solver non-convergence, 5 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, EpiSpatialError
from .scenarios import SWEEP_COLUMNS, format_report, format_value, run_scenario, run_sweep
from .verification import require_pass, run_verification

SUBCOMMAND_MODELS = {
    "simulate": ("seir-ode", "reservoir-ode", "coupled-ode", "host-pde", "reservoir-pde", "coupled-pde"),
    "eigen": ("eigen",),
    "steady": ("steady",),
}


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"values must be numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epispatial",
                                     description="Reservoir-supported epidemic reaction-diffusion kit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", type=Path, help="scenario file")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--dt", type=float, help="override the time step")
        p.add_argument("--horizon", type=float, help="override the horizon T")
        p.add_argument("--tol", type=float, help="override the solver tolerance")

    common(sub.add_parser("simulate", help="integrate an ODE or PDE scenario"))
    common(sub.add_parser("eigen", help="principal eigenpair of L + a"))
    common(sub.add_parser("steady", help="Fisher-KPP or endemic steady state"))
    p = sub.add_parser("sweep", help="rerun a scenario over parameter values")
    common(p)
    p.add_argument("--param", required=True, help="scalar rate or constant coefficient to vary")
    p.add_argument("--values", required=True, type=_parse_values, help="comma-separated values")
    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", type=Path)
    p.add_argument("--out", type=Path, help="output directory")
    return parser


def _load(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(dt=args.dt, horizon=args.horizon, tol=args.tol)


def _dispatch(args) -> int:
    if args.command == "verify":
        report = run_verification(args.suite, args.out)
        sys.stdout.write(report.summary_text())
        require_pass(report)
        return 0
    cfg = _load(args)
    if args.command == "sweep":
        rows = run_sweep(cfg, args.param, args.values, args.out)
        sys.stdout.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            sys.stdout.write(",".join(format_value(row[k]) for k in SWEEP_COLUMNS) + "\n")
        return 0
    allowed = SUBCOMMAND_MODELS[args.command]
    if cfg.model not in allowed:
        raise ConfigError(f"'{args.command}' needs a config with model in {allowed}, got {cfg.model}")
    result = run_scenario(cfg, args.out)
    sys.stdout.write(format_report(result.report))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except EpiSpatialError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
