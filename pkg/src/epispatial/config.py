"""Scenario configuration files.

A scenario is an INI file (stdlib :mod:`configparser`) with one section per
block::

    [scenario]
    model = coupled-pde          ; seir-ode reservoir-ode coupled-ode host-pde
                                 ; reservoir-pde coupled-pde eigen steady verify
    problem = fisher-kpp         ; steady only: fisher-kpp | endemic
    seed = 0

    [grid]                       ; lx ly nx ny [x0 y0]
    [mask]                       ; kind = rectangle (x0 x1 y0 y1) | disk (cx cy radius)
    [params]                     ; scalar rate constants
    [init]                       ; scalar initial populations (ODE models)
    [coef sigma]                 ; one section per coefficient field:
    kind = profile               ;   constant(value) | piecewise(inside, outside)
    name = cosine                ;   | tabulated(file) | profile(name, ...)
    base = 0.5
    [init s]                     ; initial field, same keys plus optional noise
    [stepper]                    ; dt T [tol solver]
    [output]                     ; dir stride snapshot_times
    [solver]                     ; tol (eigen and steady solves)
    [attractor]                  ; steady only: T dt

Every symbol the model needs must be present and nothing else is accepted.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EpiSpatialError
from .grid import CellMask, CoefficientSpec, build_grid, build_mask, evaluate_coefficient, restrict

MODELS = ("seir-ode", "reservoir-ode", "coupled-ode", "host-pde", "reservoir-pde",
          "coupled-pde", "eigen", "steady", "verify")
STEADY_PROBLEMS = ("fisher-kpp", "endemic")

HOST_RATES = ("lambda1", "lambda2", "gamma1", "gamma2", "mu")
SEIR_RATES = ("sigma", "omega") + HOST_RATES
RESERVOIR_RATES = ("beta", "m", "sigma1")
HOST_COEFS = ("d2", "d3", "sigma", "omega")
RESERVOIR_COEFS = ("d1", "beta", "m", "sigma1")

# coefficient name -> (role, lives on the reservoir region)
COEF_ROLES = {
    "d": ("positive", True), "a": ("any", True), "r": ("positive", True),
    "d1": ("positive", True), "beta": ("positive", True), "m": ("positive", True),
    "sigma1": ("positive", True),
    "d2": ("positive", False), "d3": ("positive", False),
    "sigma": ("positive", False), "omega": ("positive", False), "kappa": ("kappa", False),
}
FIELD_REGION = {"s": False, "e": False, "i": False, "c": False, "phi": True, "psi": True, "v0": True}


def _requirements(model: str, problem: str | None) -> dict:
    """Required and optional symbols and sections for a model."""
    req = {"params": (), "params_opt": (), "init": (), "init_opt": (), "coef": (), "fields": (),
           "fields_opt": (), "grid": False, "mask": "no", "stepper": (), "stepper_opt": (),
           "attractor": False, "scenario_opt": ("seed",)}
    if model == "seir-ode":
        req.update(params=SEIR_RATES, init=("S", "E", "I", "C"), init_opt=("R",))
    elif model == "reservoir-ode":
        req.update(params=RESERVOIR_RATES, init=("phi", "psi"))
    elif model == "coupled-ode":
        req.update(params=SEIR_RATES + ("kappa",) + RESERVOIR_RATES,
                   init=("S", "E", "I", "C", "phi", "psi"), init_opt=("R",))
    elif model == "host-pde":
        req.update(grid=True, coef=HOST_COEFS, params=HOST_RATES, fields=("s", "e", "i", "c"))
    elif model == "reservoir-pde":
        req.update(grid=True, mask="optional", coef=RESERVOIR_COEFS, fields=("phi", "psi"))
    elif model == "coupled-pde":
        req.update(grid=True, mask="required", coef=HOST_COEFS + ("kappa",) + RESERVOIR_COEFS,
                   params=HOST_RATES, fields=("s", "e", "i", "c", "phi", "psi"))
    elif model == "eigen":
        req.update(grid=True, mask="optional", coef=("d", "a"))
    elif model == "steady":
        req.update(grid=True, mask="optional", attractor=True)
        if problem == "endemic":
            req.update(coef=RESERVOIR_COEFS, fields_opt=("phi", "psi"))
        else:
            req.update(coef=("d", "a", "r"), fields_opt=("v0",))
    if model.endswith("-ode"):
        req.update(stepper=("T",), stepper_opt=("dt",))
    elif model.endswith("-pde"):
        req.update(stepper=("dt", "T"), stepper_opt=("tol", "solver"))
    if model == "steady":
        req["scenario_opt"] += ("problem",)
    if model == "verify":
        req["scenario_opt"] += ("suite",)
    return req


@dataclass
class ScenarioConfig:
    model: str
    problem: str | None = None
    seed: int = 0
    suite: str | None = None
    grid: dict | None = None
    mask: dict | None = None
    params: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    coefficients: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    stepper: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    attractor: dict = field(default_factory=dict)
    base_dir: str = field(default=".", compare=False)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def with_overrides(self, dt=None, horizon=None, tol=None, out=None) -> "ScenarioConfig":
        stepper, solver, output, attractor = dict(self.stepper), dict(self.solver), dict(self.output), dict(self.attractor)
        if dt is not None:
            (attractor if self.model == "steady" else stepper)["dt"] = float(dt)
        if horizon is not None:
            (attractor if self.model == "steady" else stepper)["T"] = float(horizon)
        if tol is not None:
            solver["tol"] = float(tol)
        if out is not None:
            output["dir"] = str(out)
        return dataclasses.replace(self, stepper=stepper, solver=solver, output=output, attractor=attractor)


# -- parsing -----------------------------------------------------------------

def _num(section, key, value, errors, integer=False):
    try:
        x = float(value)
    except ValueError:
        errors.append(f"[{section}] {key}: not a number ({value!r})")
        return None
    if integer:
        if x != int(x):
            errors.append(f"[{section}] {key}: expected an integer ({value!r})")
            return None
        return int(x)
    return x


_STRING_KEYS = {"kind", "name", "file", "dir", "solver", "model", "problem", "suite"}
_INT_KEYS = {"nx", "ny", "stride", "seed"}


def _section_dict(parser, section, errors):
    out = {}
    for key, value in parser.items(section):
        if key in _STRING_KEYS:
            out[key] = value.strip()
        elif key == "snapshot_times":
            parts = [p for p in value.replace(",", " ").split() if p]
            out[key] = tuple(x for x in (_num(section, key, p, errors) for p in parts) if x is not None)
        else:
            x = _num(section, key, value, errors, integer=key in _INT_KEYS)
            if x is not None:
                out[key] = x
    return out


def _coef_spec(section, d, errors):
    d = dict(d)
    kind = d.pop("kind", None)
    noise = d.pop("noise", None)
    if kind is None:
        errors.append(f"[{section}] missing 'kind'")
        return None, noise
    if kind == "constant":
        keys = {"value"}
    elif kind == "piecewise":
        keys = {"inside", "outside"}
    elif kind == "tabulated":
        keys = {"file"}
    elif kind == "profile":
        if "name" not in d:
            errors.append(f"[{section}] profile needs 'name'")
            return None, noise
        return CoefficientSpec("profile", d), noise
    else:
        errors.append(f"[{section}] unknown kind {kind!r}")
        return None, noise
    if set(d) != keys:
        errors.append(f"[{section}] kind {kind} needs exactly {sorted(keys)}, got {sorted(d)}")
        return None, noise
    return CoefficientSpec(kind, d), noise


def parse_config(text: str, base_dir: str = ".", source: str = "<config>") -> ScenarioConfig:
    """Parse the INI text into a :class:`ScenarioConfig` (structure only)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: parse error at line {exc.lineno}: no section header before {exc.line.strip()!r}") from exc
    except configparser.ParsingError as exc:
        raise ConfigError([f"{source}: parse error at line {n}: cannot read {line}" for n, line in exc.errors]) from exc
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        what = f"option {exc.option!r} in [{exc.section}]" if hasattr(exc, "option") else f"section [{exc.section}]"
        raise ConfigError(f"{source}: parse error at line {exc.lineno}: duplicate {what}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from exc
    errors: list[str] = []
    if not parser.has_section("scenario"):
        raise ConfigError(f"{source}: missing [scenario] section")
    sc = _section_dict(parser, "scenario", errors)
    model = sc.get("model")
    if model not in MODELS:
        raise ConfigError(f"[scenario] model must be one of {MODELS}, got {model!r}")
    cfg = ScenarioConfig(model=model, base_dir=base_dir)
    cfg.problem = sc.get("problem")
    cfg.seed = sc.get("seed", 0)
    cfg.suite = sc.get("suite")
    extra = set(sc) - {"model", "seed", "problem", "suite"}
    if extra:
        errors.append(f"[scenario] unknown keys {sorted(extra)}")

    for section in parser.sections():
        if section == "scenario":
            continue
        d = _section_dict(parser, section, errors)
        head, _, name = section.partition(" ")
        name = name.strip()
        if head == "coef" and name:
            spec, noise = _coef_spec(section, d, errors)
            if noise is not None:
                errors.append(f"[{section}] noise is only allowed for initial fields")
            if spec is not None:
                cfg.coefficients[name] = spec
        elif head == "init" and name:
            spec, noise = _coef_spec(section, d, errors)
            if spec is not None:
                cfg.fields[name] = (spec, noise)
        elif section in ("grid", "mask", "params", "init", "stepper", "output", "solver", "attractor"):
            setattr(cfg, section, d)
        else:
            errors.append(f"unknown section [{section}]")
    if errors:
        raise ConfigError(errors)
    if cfg.grid == {}:
        cfg.grid = None
    if cfg.mask == {}:
        cfg.mask = None
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path.parent), str(path))


def emit_config(cfg: ScenarioConfig) -> str:
    """Serialise to INI text; ``parse_config(emit_config(c)) == c``."""

    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(repr(float(x)) for x in v)
        if isinstance(v, bool):
            raise TypeError("booleans are not config values")
        if isinstance(v, int):
            return str(v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = ["[scenario]", f"model = {cfg.model}"]
    if cfg.problem is not None:
        lines.append(f"problem = {cfg.problem}")
    lines.append(f"seed = {cfg.seed}")
    if cfg.suite is not None:
        lines.append(f"suite = {cfg.suite}")

    def block(title, d):
        if d:
            lines.append("")
            lines.append(f"[{title}]")
            lines.extend(f"{k} = {fmt(v)}" for k, v in d.items())

    block("grid", cfg.grid)
    block("mask", cfg.mask)
    block("params", cfg.params)
    block("init", cfg.init)
    for name, spec in cfg.coefficients.items():
        block(f"coef {name}", {"kind": spec.kind, **spec.params})
    for name, (spec, noise) in cfg.fields.items():
        extra = {} if noise is None else {"noise": noise}
        block(f"init {name}", {"kind": spec.kind, **spec.params, **extra})
    block("stepper", cfg.stepper)
    block("output", cfg.output)
    block("solver", cfg.solver)
    block("attractor", cfg.attractor)
    return "\n".join(lines) + "\n"


# -- validation and building -------------------------------------------------

def _check_keys(label, have, required, optional, errors):
    have = set(have)
    missing = [k for k in required if k not in have]
    extra = sorted(have - set(required) - set(optional))
    if missing:
        errors.append(f"{label}: missing {', '.join(missing)}")
    if extra:
        errors.append(f"{label}: unexpected {', '.join(extra)}")


def check_structure(cfg: ScenarioConfig) -> list[str]:
    errors: list[str] = []
    if cfg.model == "steady" and cfg.problem not in STEADY_PROBLEMS:
        errors.append(f"steady model needs problem = one of {STEADY_PROBLEMS}")
    if cfg.model != "steady" and cfg.problem is not None:
        errors.append("'problem' is only valid for the steady model")
    if cfg.model == "verify":
        if not cfg.suite:
            errors.append("verify model needs 'suite = <path>' in [scenario]")
        return errors
    if cfg.suite is not None:
        errors.append("'suite' is only valid for the verify model")
    req = _requirements(cfg.model, cfg.problem)
    _check_keys("[params]", cfg.params, req["params"], req["params_opt"], errors)
    _check_keys("[init]", cfg.init, req["init"], req["init_opt"], errors)
    _check_keys("coefficients", cfg.coefficients, req["coef"], (), errors)
    _check_keys("initial fields", cfg.fields, req["fields"], req["fields_opt"], errors)
    _check_keys("[stepper]", cfg.stepper, req["stepper"], req["stepper_opt"], errors)
    _check_keys("[output]", cfg.output, (), ("dir", "stride", "snapshot_times"), errors)
    _check_keys("[solver]", cfg.solver, (), ("tol",), errors)
    if req["attractor"]:
        _check_keys("[attractor]", cfg.attractor, (), ("T", "dt"), errors)
    elif cfg.attractor:
        errors.append("[attractor] is only valid for the steady model")
    if req["grid"]:
        if cfg.grid is None:
            errors.append("[grid] section required")
        else:
            _check_keys("[grid]", cfg.grid, ("lx", "ly", "nx", "ny"), ("x0", "y0"), errors)
    elif cfg.grid is not None:
        errors.append("[grid] is not used by ODE models")
    if req["mask"] == "required" and cfg.mask is None:
        errors.append("[mask] section required: the reservoir lives on a proper subregion Omega_star")
    if req["mask"] == "no" and cfg.mask is not None:
        errors.append(f"[mask] is not used by model {cfg.model}")
    if cfg.mask is not None:
        kind = cfg.mask.get("kind", "rectangle")
        keys = {"rectangle": ("x0", "x1", "y0", "y1"), "disk": ("cx", "cy", "radius")}.get(kind)
        if keys is None:
            errors.append(f"[mask] unknown kind {kind!r}")
        else:
            _check_keys("[mask]", cfg.mask, keys, ("kind",), errors)
    for name, (spec, noise) in cfg.fields.items():
        if noise is not None and not 0 <= noise < 1:
            errors.append(f"[init {name}] noise must lie in [0, 1)")
    return errors


def _validate_scalars(cfg, errors):
    for k, v in cfg.params.items():
        if k == "kappa":
            if not v >= 0:
                errors.append("kappa must be nonnegative")
        elif not v > 0:
            errors.append(f"{k} must be positive")
    for k, v in cfg.init.items():
        if not v >= 0:
            errors.append(f"initial {k} must be nonnegative")
    st = cfg.stepper
    if "dt" in st and not st["dt"] > 0:
        errors.append("dt must be positive")
    if "T" in st and not st["T"] > 0:
        errors.append("T must be positive")
    if "tol" in st and not 0 < st["tol"] <= 1e-4:
        errors.append("[stepper] tol must lie in (0, 1e-4]")
    if "solver" in st and st["solver"] not in ("direct", "cg"):
        errors.append("[stepper] solver must be direct or cg")
    if "tol" in cfg.solver and not cfg.solver["tol"] > 0:
        errors.append("[solver] tol must be positive")
    if "stride" in cfg.output and not cfg.output["stride"] >= 1:
        errors.append("[output] stride must be >= 1")


@dataclass
class Built:
    """Runtime objects assembled from a validated config."""

    grid: object = None
    mask: CellMask | None = None
    coefficients: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)


def build(cfg: ScenarioConfig) -> Built:
    """Evaluate grid, mask, coefficients and initial fields, checking the
    positivity and support conditions. Raises one :class:`ConfigError`
    listing every problem."""
    errors = check_structure(cfg)
    _validate_scalars(cfg, errors)
    if errors:
        raise ConfigError(errors)
    out = Built()
    if cfg.grid is None:
        return out
    g = cfg.grid
    try:
        out.grid = build_grid(g["lx"], g["ly"], g["nx"], g["ny"], g.get("x0", 0.0), g.get("y0", 0.0))
    except ConfigError as exc:
        raise ConfigError(exc.errors) from exc
    if cfg.mask is not None:
        try:
            out.mask = build_mask(out.grid, {"kind": "rectangle", **cfg.mask})
        except ConfigError as exc:
            errors.extend(exc.errors)
    for name, spec in cfg.coefficients.items():
        role, on_region = COEF_ROLES[name]
        spec = _resolve(cfg, spec)
        try:
            out.coefficients[name] = evaluate_coefficient(
                spec, out.grid, out.mask, role=role, name=name,
                restrict_to_mask=on_region and out.mask is not None)
        except ConfigError as exc:
            errors.extend(exc.errors)
    rng = np.random.default_rng(cfg.seed)
    for name in sorted(cfg.fields):
        spec, noise = cfg.fields[name]
        spec = _resolve(cfg, spec)
        try:
            values = np.array(evaluate_coefficient(spec, out.grid, out.mask, role="nonnegative",
                                                   name=f"initial {name}"))
        except ConfigError as exc:
            errors.extend(exc.errors)
            continue
        if noise:
            values = values * (1.0 + noise * rng.uniform(-1.0, 1.0, size=values.shape))
        if FIELD_REGION[name] and out.mask is not None:
            values = restrict(values, out.mask)
        out.fields[name] = values
    if errors:
        raise ConfigError(errors)
    return out


def _resolve(cfg, spec):
    if spec.kind == "tabulated" and "file" in spec.params:
        return CoefficientSpec("tabulated", {"file": str(cfg.resolve(spec.params["file"]))})
    return spec


def parse_and_validate(path) -> ScenarioConfig:
    """Load a scenario file and run every validation check, reporting all
    failures together."""
    cfg = load_config(path)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> Built:
    built = build(cfg)
    if cfg.model == "verify":
        return built
    try:
        if cfg.model.endswith("-ode"):
            ode_problem(cfg)
        elif cfg.model.endswith("-pde"):
            from .pde import validate_setup

            validate_setup(simulation_setup(cfg, built))
    except ConfigError:
        raise
    except EpiSpatialError as exc:
        raise ConfigError(str(exc)) from exc
    return built


def ode_problem(cfg: ScenarioConfig):
    """``(model, params, init, T, dt, stride)`` for the kinetics integrator."""
    from .kinetics import ReservoirParams, SeirParams

    p, i = cfg.params, cfg.init
    host = res = None
    if cfg.model in ("seir-ode", "coupled-ode"):
        host = SeirParams(*(p[k] for k in SEIR_RATES), kappa=p.get("kappa", 0.0))
        h0 = (i["S"], i["E"], i["I"], i["C"], i.get("R", 0.0))
    if cfg.model in ("reservoir-ode", "coupled-ode"):
        res = ReservoirParams(p["beta"], p["m"], p["sigma1"])
        r0 = (i["phi"] + i["psi"], i["phi"], i["psi"])
    model = cfg.model[:-4]
    if model == "seir":
        params, init = host, h0
    elif model == "reservoir":
        params, init = res, r0
    else:
        params, init = (host, res), (h0, r0)
    return model, params, init, cfg.stepper["T"], cfg.stepper.get("dt"), cfg.output.get("stride")


def simulation_setup(cfg: ScenarioConfig, built: Built | None = None):
    from .pde import HostCoefficients, HostProblem, ReservoirProblem, SimulationSetup, StepperConfig

    built = built or build(cfg)
    c, f = built.coefficients, built.fields
    st = cfg.stepper
    stepper = StepperConfig(dt=st["dt"], T=st["T"], stride=int(cfg.output.get("stride", 1)),
                            tol=st.get("tol", 1e-12), solver=st.get("solver", "direct"),
                            snapshot_times=tuple(cfg.output.get("snapshot_times", ())))
    host = res = None
    if cfg.model in ("host-pde", "coupled-pde"):
        kappa = c.get("kappa", np.zeros(built.grid.shape))
        p = cfg.params
        coeffs = HostCoefficients(c["sigma"], c["omega"], kappa, p["lambda1"], p["lambda2"],
                                  p["gamma1"], p["gamma2"], p["mu"])
        host = HostProblem(c["d2"], c["d3"], coeffs, f["s"], f["e"], f["i"], f["c"])
    if cfg.model in ("reservoir-pde", "coupled-pde"):
        res = ReservoirProblem(*(np.ravel(c[k]) for k in RESERVOIR_COEFS),
                               np.ravel(f["phi"]), np.ravel(f["psi"]), built.mask)
    return SimulationSetup(built.grid, stepper, host, res)
