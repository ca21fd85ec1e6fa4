"""Pure-Python kernels. Reference implementation and fallback for ``_ckernels``.

Both modules expose the same functions with the same argument order; see
``kernels.py`` for how one is selected.
"""

import math

import numpy as np

SEIR, RESERVOIR, COUPLED = 0, 1, 2
DIMS = {SEIR: 5, RESERVOIR: 3, COUPLED: 8}
NPARAMS = {SEIR: 8, RESERVOIR: 3, COUPLED: 11}

OK, NEGATIVE, NONFINITE = 0, 1, 2


def _seir(y, p, psi):
    S, E, I, C = y[0], y[1], y[2], y[3]
    sigma, omega, l1, l2, g1, g2, mu, kappa = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    force = sigma * I * S + omega * S * C + kappa * S * psi
    return [
        -force,
        force - (l1 + l2) * E,
        l1 * E - (g1 + g2) * I,
        g1 * I - mu * C,
        l2 * E + g2 * I + mu * C,
    ]


def _reservoir(th, phi, psi, beta, m, s1):
    inf = s1 * phi * psi
    return [beta * th - m * th * th, beta * th - inf - m * th * phi, inf - m * th * psi]


def ode_rhs(model, y, p):
    if model == SEIR:
        return _seir(y, p, 0.0)
    if model == RESERVOIR:
        return _reservoir(y[0], y[1], y[2], p[0], p[1], p[2])
    host = _seir(y, p, y[7])
    return host + _reservoir(y[5], y[6], y[7], p[8], p[9], p[10])


def rk4_integrate(model, params, y0, dt, nsteps, stride, tol_neg):
    """Fixed-step classical RK4.

    Returns ``(records, status, fail_step)``. ``records`` holds the state at
    every step that is a multiple of ``stride`` plus the final step.
    Undershoot in ``(-tol_neg, 0)`` is clipped to zero after each step; worse
    undershoot or a non-finite value stops the run with a nonzero status.
    """
    p = [float(v) for v in params]
    y = [float(v) for v in y0]
    n = len(y)
    nout = nsteps // stride + 1 + (1 if nsteps % stride else 0)
    out = np.empty((nout, n))
    out[0] = y
    k_out = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    for step in range(1, nsteps + 1):
        k1 = ode_rhs(model, y, p)
        k2 = ode_rhs(model, [y[j] + half * k1[j] for j in range(n)], p)
        k3 = ode_rhs(model, [y[j] + half * k2[j] for j in range(n)], p)
        k4 = ode_rhs(model, [y[j] + dt * k3[j] for j in range(n)], p)
        for j in range(n):
            v = y[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not math.isfinite(v):
                return out[:k_out], NONFINITE, step
            if v < 0.0:
                if v < -tol_neg:
                    return out[:k_out], NEGATIVE, step
                v = 0.0
            y[j] = v
        if step % stride == 0 or step == nsteps:
            out[k_out] = y
            k_out += 1
    return out, OK, -1


def host_reaction(s, e, i, c, sigma, omega, kpsi, lam1, lam, gam1, gam, mu, dt):
    """Explicit Euler update of the host reaction terms, cell by cell."""
    force = s * (sigma * i + omega * c + kpsi)
    return (
        s - dt * force,
        e + dt * (force - lam * e),
        i + dt * (lam1 * e - gam * i),
        c + dt * (gam1 * i - mu * c),
    )


def reservoir_reaction(theta, phi, psi, beta, m, sigma1, dt):
    """Explicit Euler update of the reservoir reaction terms, cell by cell."""
    inf = sigma1 * phi * psi
    return (
        theta + dt * (beta * theta - m * theta * theta),
        phi + dt * (beta * theta - inf - m * theta * phi),
        psi + dt * (inf - m * theta * psi),
    )


def logistic_reaction(v, a, r, dt):
    return v + dt * (a - r * v) * v
