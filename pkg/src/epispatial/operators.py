"""Finite-volume discretisation of div(d grad u) with zero-flux boundaries,
and the linear solvers built on it."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, SolverError
from .grid import CellMask, Grid2D


@dataclass(frozen=True, eq=False)
class DiffusionOperator:
    """Sparse symmetric matrix ``L`` acting on cell values of a grid or mask.

    Unknowns are ordered by flat cell index (restricted to the mask when one
    is given). ``face_x`` / ``face_y`` hold the harmonic-mean diffusivities
    on interior faces of the full grid (NaN where a face is closed).
    """

    grid: Grid2D
    mask: CellMask | None
    matrix: sp.csr_matrix
    face_x: np.ndarray
    face_y: np.ndarray
    max_d: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def region_shape(self) -> tuple[int, ...]:
        return self.grid.shape if self.mask is None else (self.mask.cell_count,)

    @cached_property
    def _edges(self):
        coo = self.matrix.tocoo()
        off = coo.row != coo.col
        return coo.row[off], coo.col[off], coo.data[off]

    def matvec(self, u: np.ndarray) -> np.ndarray:
        """``L u`` in flux form, sum of w (u_nb - u), so constants map to
        exactly zero."""
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        rows, cols, w = self._edges
        return np.bincount(rows, weights=w * (flat[cols] - flat[rows]), minlength=self.n).reshape(u.shape)

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def spectral_bound(self) -> float:
        """Gershgorin bound: every eigenvalue of L lies in [-bound, 0]."""
        return float(2.0 * np.max(np.abs(self.diagonal())))

    def flat(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.region_shape and f.shape != (self.n,):
            raise ValueError(f"field of shape {f.shape} does not match operator region {self.region_shape}")
        return f.ravel()

    def unflat(self, v: np.ndarray) -> np.ndarray:
        return v.reshape(self.region_shape)


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def assemble_diffusion(d: np.ndarray, grid: Grid2D, mask: CellMask | None = None) -> DiffusionOperator:
    """Five-point stencil for div(d grad u) with zero normal flux on the
    grid boundary and, when ``mask`` is given, on the mask boundary.

    ``d`` is a full-grid field (2-D or flattened), or a mask-restricted one
    when ``mask`` is given.
    """
    d = np.asarray(d, dtype=float)
    if mask is None and d.shape == (grid.n_cells,):
        d = d.reshape(grid.shape)
    if mask is not None and d.shape == (mask.cell_count,):
        full = np.full(grid.shape, np.nan)
        full[mask.membership] = d
        d = full
    if d.shape != grid.shape:
        raise ValueError(f"diffusivity shape {d.shape} does not match grid {grid.shape}")
    member = np.ones(grid.shape, dtype=bool) if mask is None else mask.membership
    dm = d[member]
    if not np.all(np.isfinite(dm)) or dm.min() <= 0:
        raise ConfigError("diffusivity must be positive on the operator region")

    ny, nx = grid.shape
    local = -np.ones(grid.shape, dtype=np.int64)
    local[member] = np.arange(int(member.sum()))

    fx = np.full((ny, nx - 1), np.nan)
    open_x = member[:, :-1] & member[:, 1:]
    fx[open_x] = _harmonic(d[:, :-1][open_x], d[:, 1:][open_x])
    fy = np.full((ny - 1, nx), np.nan)
    open_y = member[:-1, :] & member[1:, :]
    fy[open_y] = _harmonic(d[:-1, :][open_y], d[1:, :][open_y])

    wx = fx[open_x] / grid.hx**2
    wy = fy[open_y] / grid.hy**2
    ax, bx = local[:, :-1][open_x], local[:, 1:][open_x]
    ay, by = local[:-1, :][open_y], local[1:, :][open_y]
    w = np.concatenate([wx, wy])
    p = np.concatenate([ax, ay])
    q = np.concatenate([bx, by])

    n = int(member.sum())
    diag = np.zeros(n)
    np.add.at(diag, p, -w)
    np.add.at(diag, q, -w)
    rows = np.concatenate([p, q, np.arange(n)])
    cols = np.concatenate([q, p, np.arange(n)])
    vals = np.concatenate([w, w, diag])
    L = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    L.sum_duplicates()
    L.sort_indices()
    fx.setflags(write=False)
    fy.setflags(write=False)
    return DiffusionOperator(grid, mask, L, fx, fy, float(dm.max()))


def linear_solve(op: DiffusionOperator, a: float, rhs: np.ndarray, tol: float = 1e-10,
                 maxiter: int | None = None, x0: np.ndarray | None = None) -> np.ndarray:
    """Solve ``(a I - L) x = rhs`` by Jacobi-preconditioned conjugate gradients.

    Stops once ``||(a I - L) x - rhs||_2 <= tol ||rhs||_2``.
    """
    if not a > 0:
        raise ValueError("shift a must be positive for (a I - L) to be positive definite")
    b = op.flat(rhs).copy()
    A = (a * sp.identity(op.n, format="csr") - op.matrix).tocsr()
    inv_diag = 1.0 / A.diagonal()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return op.unflat(np.zeros(op.n))
    if maxiter is None:
        maxiter = 10 * op.n + 100
    x = np.zeros(op.n) if x0 is None else op.flat(x0).copy()
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    target = tol * bnorm
    res = float(np.linalg.norm(r))
    for _ in range(maxiter):
        if res <= target:
            return op.unflat(x)
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r))
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if res <= target:
        return op.unflat(x)
    raise SolverError("conjugate gradients did not converge", residual=res / bnorm)


class ShiftedSolver:
    """Repeated solves of ``(a I - L) x = rhs`` for a fixed shift.

    ``method="direct"`` factorises once (sparse LU); ``method="cg"`` defers to
    :func:`linear_solve`. Accepts a single right-hand side or a stack of them
    along the first axis.
    """

    def __init__(self, op: DiffusionOperator, a: float, method: str = "direct", tol: float = 1e-12):
        if not a > 0:
            raise ValueError("shift a must be positive")
        if method not in ("direct", "cg"):
            raise ValueError(f"unknown method {method!r}")
        self.op, self.a, self.method, self.tol = op, float(a), method, tol
        self._lu = None
        if method == "direct":
            A = (self.a * sp.identity(op.n, format="csc") - op.matrix).tocsc()
            self._lu = splu(A)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self._lu is not None:
            if rhs.ndim == 1:
                return self._lu.solve(rhs)
            return self._lu.solve(np.ascontiguousarray(rhs.T)).T.copy()
        if rhs.ndim == 1:
            return linear_solve(self.op, self.a, rhs, self.tol).ravel()
        return np.stack([linear_solve(self.op, self.a, b, self.tol).ravel() for b in rhs])

    def implicit_step(self, u: np.ndarray) -> np.ndarray:
        """Backward-Euler diffusion step ``(I - L/a)^{-1} u``, computed as
        ``u + (a I - L)^{-1} L u`` so that constant fields are reproduced
        exactly. ``u`` is one field or a stack of fields."""
        u = np.asarray(u, dtype=float)
        Lu = self.op.matvec(u) if u.ndim == 1 else np.stack([self.op.matvec(row) for row in u])
        return u + self.solve(Lu)
