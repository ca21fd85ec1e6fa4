import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epispatial.errors import ConfigError
from epispatial.grid import build_grid, build_mask
from epispatial.operators import ShiftedSolver, assemble_diffusion, linear_solve


def brute_force_matrix(d, grid, member):
    """Stencil written out cell by cell: flux d_face (u_nb - u) / h^2 across
    each face shared by two member cells."""
    idx = -np.ones(grid.shape, int)
    idx[member] = np.arange(member.sum())
    n = int(member.sum())
    A = np.zeros((n, n))
    for j in range(grid.ny):
        for i in range(grid.nx):
            if not member[j, i]:
                continue
            for dj, di, h in ((0, 1, grid.hx), (0, -1, grid.hx), (1, 0, grid.hy), (-1, 0, grid.hy)):
                jj, ii = j + dj, i + di
                if 0 <= jj < grid.ny and 0 <= ii < grid.nx and member[jj, ii]:
                    w = 2 * d[j, i] * d[jj, ii] / (d[j, i] + d[jj, ii]) / h**2
                    A[idx[j, i], idx[jj, ii]] += w
                    A[idx[j, i], idx[j, i]] -= w
    return A


def random_d(grid, seed):
    return np.random.default_rng(seed).uniform(0.2, 2.0, grid.shape)


def test_matches_brute_force_full_grid():
    g = build_grid(2, 1, 7, 5)
    d = random_d(g, 0)
    op = assemble_diffusion(d, g)
    np.testing.assert_allclose(op.matrix.toarray(), brute_force_matrix(d, g, np.ones(g.shape, bool)), rtol=1e-14)


def test_matches_brute_force_on_mask():
    g = build_grid(1, 1, 10, 10)
    m = build_mask(g, {"kind": "disk", "cx": .5, "cy": .5, "radius": .35})
    d = random_d(g, 1)
    op = assemble_diffusion(d, g, m)
    np.testing.assert_allclose(op.matrix.toarray(), brute_force_matrix(d, g, m.membership), rtol=1e-14)
    restricted = assemble_diffusion(d[m.membership], g, m)
    assert (restricted.matrix != op.matrix).nnz == 0


def test_constants_in_null_space():
    g = build_grid(1, 1, 9, 6)
    op = assemble_diffusion(np.ones(g.shape), g)
    assert np.all(op.matvec(np.full(op.n, 3.7)) == 0.0)


def test_manufactured_cosine_order():
    errs = []
    for n in (32, 64):
        g = build_grid(1, 1, n, n)
        X, Y = g.centers()
        u = np.cos(np.pi * X) * np.cos(np.pi * Y)
        op = assemble_diffusion(np.ones(g.shape), g)
        errs.append(np.max(np.abs(op.matvec(u.ravel()) + 2 * np.pi**2 * u.ravel())))
    assert np.log2(errs[0] / errs[1]) >= 1.9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9), st.integers(0, 10**6))
def test_symmetry_and_sign_pattern(nx, ny, seed):
    g = build_grid(1, 1.3, nx, ny)
    op = assemble_diffusion(random_d(g, seed), g)
    A = op.matrix.toarray()
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(op.n), rng.standard_normal(op.n)
    assert abs((A @ u) @ v - u @ (A @ v)) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v) * np.abs(A).max()
    off = A - np.diag(np.diag(A))
    assert off.min() >= 0
    np.testing.assert_allclose(A.sum(axis=1), 0, atol=1e-12 * np.abs(A).max())


def test_nonpositive_diffusivity_rejected():
    g = build_grid(1, 1, 4, 4)
    with pytest.raises(ConfigError):
        assemble_diffusion(np.zeros(g.shape), g)


def test_linear_solve_recovers_known_solution():
    g = build_grid(1, 1, 16, 16)
    op = assemble_diffusion(random_d(g, 2), g)
    y = np.random.default_rng(2).random(op.n)
    rhs = y - op.matvec(y)
    np.testing.assert_allclose(linear_solve(op, 1.0, rhs, tol=1e-12).ravel(), y, atol=1e-9)


def test_linear_solve_constant_rhs():
    g = build_grid(1, 1, 8, 8)
    op = assemble_diffusion(random_d(g, 3), g)
    np.testing.assert_allclose(linear_solve(op, 1.0, np.ones(op.n)), 1.0, atol=1e-10)


def test_linear_solve_matches_dense_oracle():
    g = build_grid(1, 1, 8, 8)
    op = assemble_diffusion(random_d(g, 4), g)
    rhs = np.random.default_rng(4).standard_normal(op.n)
    dense = np.linalg.solve(2.5 * np.eye(op.n) - op.matrix.toarray(), rhs)
    np.testing.assert_allclose(linear_solve(op, 2.5, rhs, tol=1e-12).ravel(), dense, atol=1e-8)


@pytest.mark.parametrize("method", ["direct", "cg"])
def test_shifted_solver(method):
    g = build_grid(1, 1, 8, 8)
    op = assemble_diffusion(random_d(g, 5), g)
    rhs = np.random.default_rng(5).standard_normal((3, op.n))
    dense = np.linalg.solve(4.0 * np.eye(op.n) - op.matrix.toarray(), rhs.T).T
    np.testing.assert_allclose(ShiftedSolver(op, 4.0, method, 1e-12).solve(rhs), dense, atol=1e-9)
