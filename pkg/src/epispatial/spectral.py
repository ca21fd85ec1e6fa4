"""Principal eigenpair of ``L + diag(a)`` and the persistence threshold.

``L + diag(a)`` has nonnegative off-diagonal entries and, on a connected
region, is irreducible. Its largest eigenvalue is therefore simple with a
strictly positive eigenvector. We find it by shifted inverse power
iteration: iterate ``x <- (sigma I - A)^{-1} x`` with the shift ``sigma``
kept strictly above the principal eigenvalue, so ``sigma I - A`` is a
nonsingular M-matrix with a positive inverse. The shift comes from the
Collatz-Wielandt bound ``max_i (A x)_i / x_i``, which is an upper bound on
the principal eigenvalue for any positive ``x`` and tightens as ``x``
converges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SolverError
from .operators import DiffusionOperator

TOL_LAMBDA = 1e-8


@dataclass(frozen=True)
class EigenResult:
    lambda0: float
    xi: np.ndarray
    residual: float
    iterations: int


def _rayleigh(A, x):
    Ax = A @ x
    rho = float(x @ Ax)
    return Ax, rho, float(np.linalg.norm(Ax - rho * x))


def principal_eigenpair(op: DiffusionOperator, a: np.ndarray, tol: float = 1e-10,
                        maxiter: int = 2000) -> EigenResult:
    """Largest eigenvalue of ``L + diag(a)`` and its positive, unit-norm
    eigenvector (shaped like the operator region)."""
    a = op.flat(a)
    n = op.n
    A = (op.matrix + sp.diags(a)).tocsc()
    identity = sp.identity(n, format="csc")
    scale = op.spectral_bound() + float(np.max(np.abs(a)))
    floor = max(tol, 64 * np.finfo(float).eps * max(scale, 1.0))

    x = np.full(n, 1.0 / np.sqrt(n))
    Ax, rho, res = _rayleigh(A, x)
    if res <= floor:
        return EigenResult(rho, op.unflat(x), res, 0)

    lu, shift = None, None
    for it in range(1, maxiter + 1):
        cw = float(np.max(Ax / x)) if np.all(x > 0) else rho + res
        gap = max(cw - rho, floor * 1e-2, 1e-12 * max(1.0, abs(cw)))
        target = cw + gap
        if lu is None or shift - rho > 4.0 * (target - rho):
            shift = target
            lu = splu((shift * identity - A).tocsc())
        y = lu.solve(x)
        if not np.all(np.isfinite(y)):
            raise SolverError("inverse iteration produced non-finite values", residual=res)
        y /= np.linalg.norm(y)
        if y.sum() < 0:
            y = -y
        x = y
        rho_prev = rho
        Ax, rho, res = _rayleigh(A, x)
        if res <= floor and abs(rho - rho_prev) <= tol:
            break
    else:
        raise SolverError(f"principal eigenpair did not converge in {maxiter} iterations", residual=res)
    if x.min() <= 0:
        raise SolverError("computed principal eigenvector is not positive (internal error)")
    return EigenResult(rho, op.unflat(x), res, it)


def classify(lambda0: float, tol_lambda: float = TOL_LAMBDA) -> str:
    if lambda0 > tol_lambda:
        return "endemic"
    if lambda0 < -tol_lambda:
        return "extinction"
    return "indeterminate"


@dataclass(frozen=True)
class ThresholdReport:
    R: np.ndarray
    lambda0: float
    regime: str
    integral_R: float
    remark_positive: bool
    eigen: EigenResult

    def as_text(self) -> str:
        return (f"regime={self.regime}\n"
                f"lambda0={self.lambda0:.12f}\n"
                f"integral_R={self.integral_R:.12g}\n"
                f"positive_integral={str(self.remark_positive).lower()}\n")


def threshold_report(theta_star: np.ndarray, sigma1: np.ndarray, m: np.ndarray, op: DiffusionOperator,
                     tol: float = 1e-10, tol_lambda: float = TOL_LAMBDA) -> ThresholdReport:
    """Classify persistence of the reservoir infection from the sign of the
    principal eigenvalue with weight ``R = theta* (sigma1 - m)``.

    ``positive_integral`` flags the sufficient condition that a positive
    integral of ``R`` forces a positive principal eigenvalue.
    """
    theta_star, sigma1, m = (op.flat(v) for v in (theta_star, sigma1, m))
    if np.any(theta_star <= 0):
        raise ValueError("carrying-capacity profile must be strictly positive")
    R = theta_star * (sigma1 - m)
    eig = principal_eigenpair(op, R, tol)
    integral = float(R.sum()) * op.grid.cell_area
    return ThresholdReport(op.unflat(R), eig.lambda0, classify(eig.lambda0, tol_lambda), integral,
                           integral > 0, eig)
