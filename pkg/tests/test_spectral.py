import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epispatial.grid import build_grid, build_mask
from epispatial.operators import assemble_diffusion
from epispatial.spectral import TOL_LAMBDA, classify, principal_eigenpair, threshold_report


def op_on(n=16, d=1.0, lx=1.0, mask=None):
    g = build_grid(lx, 1, n, n)
    return assemble_diffusion(np.full(g.shape, d) if np.isscalar(d) else d, g, mask)


def dense_top(op, a):
    return np.linalg.eigvalsh(op.matrix.toarray() + np.diag(op.flat(a)))[-1]


@pytest.mark.parametrize("c", [-2.0, 0.0, 3.0])
@pytest.mark.parametrize("d", [0.01, 1.0, 7.5])
def test_constant_weight_exact(c, d):
    op = op_on(d=d)
    res = principal_eigenpair(op, np.full(op.region_shape, c))
    assert abs(res.lambda0 - c) <= 1e-10
    assert np.ptp(res.xi) <= 1e-10
    assert np.linalg.norm(res.xi) == pytest.approx(1.0)


def test_sign_changing_weight_matches_dense():
    op = op_on()
    X, _ = op.grid.centers()
    a = np.where(X < 0.5, 1.0, -2.0)
    res = principal_eigenpair(op, a)
    assert abs(res.lambda0 - dense_top(op, a)) <= 1e-8
    assert res.xi.min() > 0


def test_heterogeneous_diffusivity_on_mask_matches_dense():
    g = build_grid(1, 1, 14, 14)
    m = build_mask(g, {"kind": "disk", "cx": .5, "cy": .5, "radius": .4})
    rng = np.random.default_rng(0)
    op = assemble_diffusion(rng.uniform(0.05, 1, m.cell_count), g, m)
    a = rng.uniform(-3, 1, m.cell_count)
    res = principal_eigenpair(op, a)
    assert abs(res.lambda0 - dense_top(op, a)) <= 1e-8


def test_quarter_support_is_positive():
    op = op_on()
    X, Y = op.grid.centers()
    a = ((X < 0.5) & (Y < 0.5)).astype(float)
    assert principal_eigenpair(op, a).lambda0 > TOL_LAMBDA


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_rayleigh_maximality_and_shift(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(1, 1, 8, 8)
    op = assemble_diffusion(rng.uniform(0.1, 2, g.shape), g)
    a = rng.uniform(-2, 2, g.shape)
    res = principal_eigenpair(op, a)
    A = op.matrix.toarray() + np.diag(a.ravel())
    u = rng.standard_normal((100, op.n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    assert np.all(np.einsum("ij,jk,ik->i", u, A, u) <= res.lambda0 + 1e-10)
    c = rng.uniform(-3, 3)
    assert principal_eigenpair(op, a + c).lambda0 == pytest.approx(res.lambda0 + c, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_monotone_in_weight(seed):
    rng = np.random.default_rng(seed)
    op = op_on(n=8)
    a1 = rng.uniform(-2, 2, op.region_shape)
    a2 = a1 + rng.uniform(0, 1, op.region_shape)
    assert principal_eigenpair(op, a1).lambda0 <= principal_eigenpair(op, a2).lambda0 + 1e-10


def test_mesh_stability_order():
    lams = []
    for n in (16, 32, 64):
        op = op_on(n=n, d=0.05)
        X, Y = op.grid.centers()
        lams.append(principal_eigenpair(op, np.cos(np.pi * X) + 0.5 * np.cos(np.pi * Y) - 0.2).lambda0)
    assert np.log2(abs(lams[0] - lams[1]) / abs(lams[1] - lams[2])) >= 1.8


def test_classify_dead_band():
    assert classify(1e-3) == "endemic"
    assert classify(-1e-3) == "extinction"
    assert classify(5e-9) == "indeterminate"


@pytest.mark.parametrize("sigma1,regime,lam", [(2.0, "endemic", 2.0), (0.5, "extinction", -1.0),
                                               (1.0, "indeterminate", 0.0)])
def test_threshold_report_constants(sigma1, regime, lam):
    op = op_on(n=8)
    shape = op.region_shape
    rep = threshold_report(np.full(shape, 2.0), np.full(shape, sigma1), np.ones(shape), op)
    assert rep.regime == regime
    assert rep.lambda0 == pytest.approx(lam, abs=1e-10)
    assert "regime=" + regime in rep.as_text()


def test_positive_integral_flag():
    op = op_on(n=12)
    X, _ = op.grid.centers()
    rep = threshold_report(np.full(op.region_shape, 2.0), np.where(X < 0.5, 2.0, 0.8), np.ones(op.region_shape), op)
    assert rep.integral_R > 0 and rep.remark_positive and rep.regime == "endemic"
