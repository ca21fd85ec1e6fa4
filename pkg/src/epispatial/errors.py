"""Exception hierarchy.

Each family maps onto one CLI exit code, so callers at the top level can
translate failures without string matching.
"""


class EpiSpatialError(Exception):
    exit_code = 1


class ConfigError(EpiSpatialError, ValueError):
    """Invalid configuration. Carries every problem found, not just the first."""

    exit_code = 2

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DomainError(EpiSpatialError, ValueError):
    """Negative or otherwise out-of-domain state passed to a model function."""

    exit_code = 2


class InstabilityError(EpiSpatialError, ArithmeticError):
    """Time stepping left the nonnegative orthant or produced non-finite values."""

    exit_code = 3

    def __init__(self, message, time=None):
        self.time = time
        if time is not None:
            message = f"{message} (t={time:.6g})"
        super().__init__(message)


class SolverError(EpiSpatialError, RuntimeError):
    """Iterative solver failed to converge."""

    exit_code = 4

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual={residual:.3e})"
        super().__init__(message)


class DegenerateThresholdError(SolverError):
    """Principal eigenvalue inside the dead band around zero."""


class VerificationFailure(EpiSpatialError):
    exit_code = 5
