"""Pure-numpy RK4 stepping, used when the compiled core is unavailable.

Same contract as ``holowave._kernels.rk4_steps``.
"""

from __future__ import annotations

import numpy as np


def _tri_apply(lo, di, up, x):
    out = di * x
    out[:-1] += up * x[1:]
    out[1:] += lo * x[:-1]
    return out


def rk4_steps(lo, di, up, blo, bdi, bup, u, v, prof, qtab, dt, nsteps):
    """Advance ``(u, v)`` in place by ``nsteps`` classical RK4 steps.

    Returns the index of the first step producing a non-finite value, or ``-1``.
    """
    n = u.shape[0]
    damped = bdi.shape[0] == n
    nprof = prof.shape[0]

    def rhs(uu, vv, row):
        dv = -_tri_apply(lo, di, up, uu)
        if damped:
            dv += _tri_apply(blo, bdi, bup, vv)
        if nprof:
            dv += qtab[row] @ prof
        return vv, dv

    h2 = 0.5 * dt
    for step in range(nsteps):
        k1u, k1v = rhs(u, v, 2 * step)
        k2u, k2v = rhs(u + h2 * k1u, v + h2 * k1v, 2 * step + 1)
        k3u, k3v = rhs(u + h2 * k2u, v + h2 * k2v, 2 * step + 1)
        k4u, k4v = rhs(u + dt * k3u, v + dt * k3v, 2 * step + 2)
        u += (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v += (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            return step
    return -1
