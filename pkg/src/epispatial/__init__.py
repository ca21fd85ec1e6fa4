"""Simulation and analysis kit for reservoir-supported epidemic spread.

Host SEIR-C and reservoir SI kinetics, their partially dissipative
reaction-diffusion versions, the principal-eigenvalue persistence threshold,
Fisher-KPP and endemic steady states, and a verification harness.
"""

from .config import ScenarioConfig, emit_config, load_config, parse_and_validate, parse_config
from .errors import (ConfigError, DegenerateThresholdError, DomainError, EpiSpatialError, InstabilityError,
                     SolverError, VerificationFailure)
from .grid import (CellMask, CoefficientSpec, Grid2D, build_grid, build_mask, evaluate_coefficient,
                   extend_by_zero, integrate_field, restrict)
from .kernels import BACKEND
from .kinetics import (ReservoirParams, SeirParams, TimeSeries, integrate_ode, predicted_limits,
                       reservoir_rhs, seir_rhs)
from .operators import DiffusionOperator, assemble_diffusion, linear_solve
from .pde import (HostCoefficients, HostProblem, ReservoirProblem, SimOutput, SimulationSetup, StepperConfig,
                  run_simulation, step_host, step_reservoir)
from .scenarios import run_scenario, run_sweep
from .spectral import EigenResult, ThresholdReport, classify, principal_eigenpair, threshold_report
from .steady import EndemicState, SteadyState, endemic_steady, fisher_kpp_steady, verify_attractor
from .verification import VerificationSuite, load_suite, run_verification

__version__ = "0.1.0"
