"""Time the compiled RK4 core against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py [--sizes 200 800 3200] [--steps 2000]``.
Both kernels advance the same damped, sourced system and the script checks
that they agree before reporting microseconds per step.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from holowave import _fallback
from holowave.elliptic import assemble_system
from holowave.evolution import stable_step
from holowave.geometry import ads_metric, assemble_operator
from holowave.holography import evolution_grid
from holowave.twisted import TwistParams

try:
    from holowave import _kernels
except ImportError:
    _kernels = None


def setup(npoints: int, nsteps: int):
    p = TwistParams.from_alpha(4, 1.5, 0.5)
    grid = evolution_grid(npoints, p.a)
    ops = assemble_operator(ads_metric(4), p, 0, grid)
    s = assemble_system(ops)
    n = grid.size - 1
    # static AdS has no first-order time term; add a weak friction so the damped path runs
    bdi = np.full(n, -0.1)
    blo = bup = np.zeros(n - 1)
    x = grid.points[:n]
    u = np.sin(np.pi * x / p.a) * x ** p.alpha
    v = np.zeros(n)
    prof = np.stack([x ** p.alpha * (p.a - x), np.cos(x)])
    tt = np.linspace(0.0, 1.0, 2 * nsteps + 1)
    qtab = np.ascontiguousarray(np.stack([np.sin(tt), tt ** 2], axis=1))
    dt = stable_step(ops)
    return (s.lower, s.diag, s.upper, blo, bdi, bup), u, v, prof, qtab, dt


def run(kernel, args, u, v, prof, qtab, dt, nsteps):
    uu, vv = u.copy(), v.copy()
    start = time.perf_counter()
    bad = kernel(*args, uu, vv, prof, qtab, dt, nsteps)
    elapsed = time.perf_counter() - start
    if bad >= 0:
        raise RuntimeError(f"non-finite value at step {bad}")
    return uu, vv, elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[200, 800, 3200])
    parser.add_argument("--steps", type=int, default=2000)
    ns = parser.parse_args()
    print(f"{'N':>6} {'fallback us/step':>18} {'compiled us/step':>18} {'speedup':>8} {'max diff':>10}")
    for npoints in ns.sizes:
        args, u, v, prof, qtab, dt = setup(npoints, ns.steps)
        uf, _, tf = run(_fallback.rk4_steps, args, u, v, prof, qtab, dt, ns.steps)
        if _kernels is None:
            print(f"{npoints:>6} {1e6 * tf / ns.steps:>18.2f} {'n/a':>18}")
            continue
        uc, _, tc = run(_kernels.rk4_steps, args, u, v, prof, qtab, dt, ns.steps)
        diff = float(np.max(np.abs(uf - uc)) / max(np.max(np.abs(uf)), 1e-300))
        print(f"{npoints:>6} {1e6 * tf / ns.steps:>18.2f} {1e6 * tc / ns.steps:>18.2f} "
              f"{tf / tc:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
