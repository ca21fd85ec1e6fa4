# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()

DEF SEIR = 0
DEF RESERVOIR = 1
DEF COUPLED = 2


cdef inline void _seir(const double* y, const double* p, double psi, double* dy) noexcept nogil:
    cdef double S = y[0], E = y[1], I = y[2], C = y[3]
    cdef double force = p[0] * I * S + p[1] * S * C + p[7] * S * psi
    dy[0] = -force
    dy[1] = force - (p[2] + p[3]) * E
    dy[2] = p[2] * E - (p[4] + p[5]) * I
    dy[3] = p[4] * I - p[6] * C
    dy[4] = p[3] * E + p[5] * I + p[6] * C


cdef inline void _reservoir(const double* y, double beta, double m, double s1, double* dy) noexcept nogil:
    cdef double th = y[0], phi = y[1], psi = y[2]
    cdef double inf = s1 * phi * psi
    dy[0] = beta * th - m * th * th
    dy[1] = beta * th - inf - m * th * phi
    dy[2] = inf - m * th * psi


cdef inline void _rhs(int model, const double* y, const double* p, double* dy) noexcept nogil:
    if model == SEIR:
        _seir(y, p, 0.0, dy)
    elif model == RESERVOIR:
        _reservoir(y, p[0], p[1], p[2], dy)
    else:
        _seir(y, p, y[7], dy)
        _reservoir(y + 5, p[8], p[9], p[10], dy + 5)


def rk4_integrate(int model, params, y0, double dt, Py_ssize_t nsteps, Py_ssize_t stride, double tol_neg):
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[::1] y = np.array(y0, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t nout = nsteps // stride + 1 + (1 if nsteps % stride else 0)
    out_arr = np.empty((nout, n))
    cdef double[:, ::1] out = out_arr
    cdef double k1[8]
    cdef double k2[8]
    cdef double k3[8]
    cdef double k4[8]
    cdef double tmp[8]
    cdef double half = 0.5 * dt, sixth = dt / 6.0, v
    cdef Py_ssize_t step, j, k_out = 1
    cdef int status = 0
    cdef Py_ssize_t fail = -1
    for j in range(n):
        out[0, j] = y[j]
    with nogil:
        for step in range(1, nsteps + 1):
            _rhs(model, &y[0], &p[0], k1)
            for j in range(n):
                tmp[j] = y[j] + half * k1[j]
            _rhs(model, tmp, &p[0], k2)
            for j in range(n):
                tmp[j] = y[j] + half * k2[j]
            _rhs(model, tmp, &p[0], k3)
            for j in range(n):
                tmp[j] = y[j] + dt * k3[j]
            _rhs(model, tmp, &p[0], k4)
            for j in range(n):
                v = y[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                if not isfinite(v):
                    status = 2
                    break
                if v < 0.0:
                    if v < -tol_neg:
                        status = 1
                        break
                    v = 0.0
                y[j] = v
            if status != 0:
                fail = step
                break
            if step % stride == 0 or step == nsteps:
                for j in range(n):
                    out[k_out, j] = y[j]
                k_out += 1
    if status != 0:
        return out_arr[:k_out], status, fail
    return out_arr, 0, -1


def host_reaction(s, e, i, c, sigma, omega, kpsi, double lam1, double lam,
                  double gam1, double gam, double mu, double dt):
    cdef const double[::1] S = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[::1] E = np.ascontiguousarray(e, dtype=np.float64)
    cdef const double[::1] I = np.ascontiguousarray(i, dtype=np.float64)
    cdef const double[::1] C = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] sg = np.ascontiguousarray(sigma, dtype=np.float64)
    cdef const double[::1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const double[::1] kp = np.ascontiguousarray(kpsi, dtype=np.float64)
    cdef Py_ssize_t n = S.shape[0], k
    s1 = np.empty(n)
    e1 = np.empty(n)
    i1 = np.empty(n)
    c1 = np.empty(n)
    cdef double[::1] S1 = s1, E1 = e1, I1 = i1, C1 = c1
    cdef double force
    with nogil:
        for k in range(n):
            force = S[k] * (sg[k] * I[k] + om[k] * C[k] + kp[k])
            S1[k] = S[k] - dt * force
            E1[k] = E[k] + dt * (force - lam * E[k])
            I1[k] = I[k] + dt * (lam1 * E[k] - gam * I[k])
            C1[k] = C[k] + dt * (gam1 * I[k] - mu * C[k])
    return s1, e1, i1, c1


def reservoir_reaction(theta, phi, psi, beta, m, sigma1, double dt):
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef const double[::1] ps = np.ascontiguousarray(psi, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(beta, dtype=np.float64)
    cdef const double[::1] mm = np.ascontiguousarray(m, dtype=np.float64)
    cdef const double[::1] s1 = np.ascontiguousarray(sigma1, dtype=np.float64)
    cdef Py_ssize_t n = th.shape[0], k
    th_out = np.empty(n)
    ph_out = np.empty(n)
    ps_out = np.empty(n)
    cdef double[::1] T1 = th_out, P1 = ph_out, Q1 = ps_out
    cdef double inf
    with nogil:
        for k in range(n):
            inf = s1[k] * ph[k] * ps[k]
            T1[k] = th[k] + dt * (b[k] * th[k] - mm[k] * th[k] * th[k])
            P1[k] = ph[k] + dt * (b[k] * th[k] - inf - mm[k] * th[k] * ph[k])
            Q1[k] = ps[k] + dt * (inf - mm[k] * th[k] * ps[k])
    return th_out, ph_out, ps_out


def logistic_reaction(v, a, r, double dt):
    cdef const double[::1] V = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] R = np.ascontiguousarray(r, dtype=np.float64)
    cdef Py_ssize_t n = V.shape[0], k
    out = np.empty(n)
    cdef double[::1] O = out
    with nogil:
        for k in range(n):
            O[k] = V[k] + dt * (A[k] - R[k] * V[k]) * V[k]
    return out
