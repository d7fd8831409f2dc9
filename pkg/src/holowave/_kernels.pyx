# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 stepping for the tridiagonal first-order system.

The system is ``u' = v`` and ``v' = -K u + B v + S(t)`` with tridiagonal
``K`` and ``B`` and a source ``S(t) = sum_i q_i(t) P_i``.
"""

import numpy as np
from libc.math cimport isfinite


cdef inline void _rhs(const double[::1] lo, const double[::1] di, const double[::1] up,
                      const double[::1] blo, const double[::1] bdi, const double[::1] bup,
                      bint damped, const double[:, ::1] prof, const double* q, Py_ssize_t nprof,
                      const double[::1] u, const double[::1] v, double[::1] du, double[::1] dv,
                      Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double c
    # one fused pass over the tridiagonal stencils
    du[0] = v[0]
    dv[0] = -(di[0] * u[0] + up[0] * u[1])
    for i in range(1, n - 1):
        du[i] = v[i]
        dv[i] = -(lo[i - 1] * u[i - 1] + di[i] * u[i] + up[i] * u[i + 1])
    du[n - 1] = v[n - 1]
    dv[n - 1] = -(lo[n - 2] * u[n - 2] + di[n - 1] * u[n - 1])
    if damped:
        dv[0] += bdi[0] * v[0] + bup[0] * v[1]
        for i in range(1, n - 1):
            dv[i] += blo[i - 1] * v[i - 1] + bdi[i] * v[i] + bup[i] * v[i + 1]
        dv[n - 1] += blo[n - 2] * v[n - 2] + bdi[n - 1] * v[n - 1]
    for k in range(nprof):
        c = q[k]
        if c != 0.0:
            for i in range(n):
                dv[i] += c * prof[k, i]


def rk4_steps(lo, di, up, blo, bdi, bup, double[::1] u, double[::1] v, prof, qtab,
              double dt, Py_ssize_t nsteps):
    """Advance ``(u, v)`` in place by ``nsteps`` classical RK4 steps.

    ``qtab`` has ``2 * nsteps + 1`` rows holding the source coefficients at
    the half-step times.  Returns the index of the first step producing a
    non-finite value, or ``-1``.
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef const double[::1] klo = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] kdi = np.ascontiguousarray(di, dtype=np.float64)
    cdef const double[::1] kup = np.ascontiguousarray(up, dtype=np.float64)
    cdef bint damped = len(bdi) == n
    cdef const double[::1] dlo = np.ascontiguousarray(blo if damped else np.zeros(1), dtype=np.float64)
    cdef const double[::1] ddi = np.ascontiguousarray(bdi if damped else np.zeros(1), dtype=np.float64)
    cdef const double[::1] dup = np.ascontiguousarray(bup if damped else np.zeros(1), dtype=np.float64)
    cdef const double[:, ::1] P = np.ascontiguousarray(prof, dtype=np.float64)
    cdef const double[:, ::1] Q = np.ascontiguousarray(qtab, dtype=np.float64)
    cdef Py_ssize_t nprof = P.shape[0]
    if n < 2:
        raise ValueError("need at least two unknowns")
    cdef double[::1] k1u = np.empty(n), k1v = np.empty(n)
    cdef double[::1] k2u = np.empty(n), k2v = np.empty(n)
    cdef double[::1] k3u = np.empty(n), k3v = np.empty(n)
    cdef double[::1] k4u = np.empty(n), k4v = np.empty(n)
    cdef double[::1] tu = np.empty(n), tv = np.empty(n)
    cdef Py_ssize_t step, i
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    cdef bint ok
    cdef Py_ssize_t bad = -1
    with nogil:
        for step in range(nsteps):
            _rhs(klo, kdi, kup, dlo, ddi, dup, damped, P, &Q[2 * step, 0],
                 nprof, u, v, k1u, k1v, n)
            for i in range(n):
                tu[i] = u[i] + h2 * k1u[i]
                tv[i] = v[i] + h2 * k1v[i]
            _rhs(klo, kdi, kup, dlo, ddi, dup, damped, P, &Q[2 * step + 1, 0],
                 nprof, tu, tv, k2u, k2v, n)
            for i in range(n):
                tu[i] = u[i] + h2 * k2u[i]
                tv[i] = v[i] + h2 * k2v[i]
            _rhs(klo, kdi, kup, dlo, ddi, dup, damped, P, &Q[2 * step + 1, 0],
                 nprof, tu, tv, k3u, k3v, n)
            for i in range(n):
                tu[i] = u[i] + dt * k3u[i]
                tv[i] = v[i] + dt * k3v[i]
            _rhs(klo, kdi, kup, dlo, ddi, dup, damped, P, &Q[2 * step + 2, 0],
                 nprof, tu, tv, k4u, k4v, n)
            ok = True
            for i in range(n):
                u[i] += h6 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i])
                v[i] += h6 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
                if not (isfinite(u[i]) and isfinite(v[i])):
                    ok = False
            if not ok:
                bad = step
                break
    return bad
