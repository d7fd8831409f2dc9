"""Acceptance suite: one PASS/FAIL line per criterion.

Every check computes its own oracle (closed forms, Bessel zeros, two-grid
extrapolation, exact eigen-expansions) and compares at the stated
tolerance.  Run directly with ``python tests/test_acceptance.py`` or
through pytest; both print the verdict lines.
"""

from __future__ import annotations

import numpy as np
import pytest

from acceptance_log import record
from holowave.boundary import BoundaryDatum, DatumMode, bump_datum, peel, residual_slope
from holowave.elliptic import (assemble_system, eigenmodes, elliptic_ratio,
                               exact_model_eigenvalue, relative_residual, solve_elliptic)
from holowave.errors import NoContraction
from holowave.evolution import (SeparableSource, _energy_parts, dominant_frequency,
                                energy_history, evolve, gronwall_check, gronwall_stable,
                                stable_step, tower_energy, tower_norm_sq)
from holowave.geometry import ads_metric, assemble_operator, model_operator
from holowave.grid import RadialGrid
from holowave.harness import HARDY_FAMILY
from holowave.holography import (NonlinearitySpec, contraction_threshold, evolution_grid,
                                 nonlinear_exponent_threshold, solve_linear_ibvp,
                                 solve_nonlinear_ibvp)
from holowave.twisted import (HARDY_CHECKS, GridFunction, TwistParams, decay_slope,
                              hardy_report, inner, moser_scan, morrey_report, op_A,
                              op_A_star, ordered_twist, random_smooth_field, stagger,
                              twist_d, twist_d_star)

ALPHAS = (0.5, 1.0, 1.5, 2.5)
A_HALVING = (1.0, 0.5, 0.25, 0.125)
# frozen regression constant of the product bound (about twice the largest
# ratio observed when the suite was first run)
MOSER_BOUND = 0.02


def _nonincreasing(sups: dict, tolerance: float) -> bool:
    """Values keyed by ``a`` may not grow by more than ``tolerance`` as ``a`` halves."""
    vals = [sups[a] for a in sorted(sups)]
    return all(np.isfinite(vals)) and all(vals[i] <= vals[i + 1] * (1.0 + tolerance)
                                          for i in range(len(vals) - 1))


# 1 -------------------------------------------------------------------------------
def _wnorm(values, weights) -> float:
    return float(np.sqrt(np.sum(weights * values ** 2)))


def criterion_1():
    worst = {}
    for alpha in ALPHAS:
        g = RadialGrid.make(800, 0.5)
        st = stagger(g, alpha)
        x, y = g.points, st.cell_points
        phi = GridFunction(g, np.cos(3.0 * y) * (1.0 + y), staggered=True, alpha=alpha)
        back = twist_d(op_A(phi, alpha), alpha).values
        # relative errors in the discrete L2(x dx) norms the operators act on
        e_da = _wnorm(back - phi.values, st.cell_w) / _wnorm(phi.values, st.cell_w)
        psi = GridFunction(g, np.sin(3.0 * x) + x ** 2)
        back = twist_d_star(op_A_star(psi, alpha), alpha).values
        e_dsas = _wnorm(back - psi.values, st.node_w) / _wnorm(psi.values, st.node_w)
        u_vals = np.sin(2.0 * np.pi * x) * x
        u_vals[-1] = 0.0
        u = GridFunction(g, u_vals)
        v = GridFunction(g, np.exp(y), staggered=True, alpha=alpha)
        lhs, rhs = inner(twist_d(u, alpha), v), inner(u, twist_d_star(v, alpha))
        e_adj = abs(lhs - rhs) / abs(lhs)
        # kernels: D x^-alpha = 0 and D* y^(alpha-1) = 0, measured against the
        # size of the terms that cancel in the difference quotient
        k1 = twist_d(GridFunction(g, x ** -alpha, trace=1.0), alpha).values / st.coef
        w = x ** -alpha * st.xa
        e_k1 = np.max(np.abs(k1)) / np.max(np.abs(w))
        k2 = twist_d_star(GridFunction(g, y ** (alpha - 1.0), staggered=True, alpha=alpha),
                          alpha).values
        z = st.zfac * y ** (alpha - 1.0)
        e_k2 = np.max(np.abs(k2 * st.node_w / st.xa)) / np.max(np.abs(z))
        k3 = twist_d_star(twist_d(GridFunction(g, x ** alpha), alpha), alpha).values
        z3 = st.zfac * twist_d(GridFunction(g, x ** alpha), alpha).values
        e_k3 = np.max(np.abs(k3 * st.node_w / st.xa)) / np.max(np.abs(z3))
        worst[alpha] = max(e_da, e_dsas, e_adj, e_k1, e_k2, e_k3)
    top = max(worst.values())
    return top <= 1e-12, f"largest relative identity error {top:.2e} (limit 1e-12)"


# 2 -------------------------------------------------------------------------------
def criterion_2():
    names = sorted(HARDY_FAMILY)
    family = [HARDY_FAMILY[k] for k in names]
    bad, spread = [], 0.0
    for alpha in ALPHAS:
        p = TwistParams.from_alpha(4, alpha)
        for s, r in ((0.0, 1.0), (0.5 * alpha, 0.5 * alpha + 0.5)):
            reps = hardy_report(family, s, r, A_HALVING, p, npoints=800)
            for name in HARDY_CHECKS:
                sups = reps[name].sup_by_a()
                vals = np.array(list(sups.values()))
                spread = max(spread, float((vals.max() - vals.min()) / vals.max()))
                if not reps[name].pass_:
                    bad.append((alpha, s, name))
    return not bad, f"{len(ALPHAS)} alphas x 2 weight pairs x 5 checks, max sup spread " \
                    f"{spread:.2e} (limit 5%), failing {bad}"


# 3 -------------------------------------------------------------------------------
def criterion_3():
    worst = 0.0
    for alpha in ALPHAS:
        g = RadialGrid.make(40000, 1.0, "geometric")
        x = g.points
        for s in (alpha, alpha + 1.0, alpha + 2.0):
            got = ordered_twist(2, GridFunction(g, x ** s), alpha).values
            want = (alpha ** 2 - s ** 2) * x ** (s - 2.0)
            inner_pts = slice(1, -1)
            # the s = alpha case vanishes; normalise by the size of x^(s-2)
            scale = np.abs(x ** (s - 2.0))[inner_pts] * max(abs(alpha ** 2 - s ** 2), alpha ** 2)
            err = float(np.max(np.abs(got - want)[inner_pts] / scale))
            worst = max(worst, err)
    return worst <= 1e-6, f"largest pointwise relative error {worst:.2e} (limit 1e-6)"


# 4 -------------------------------------------------------------------------------
def criterion_4():
    metric = ads_metric(4)
    p = TwistParams.from_alpha(4, 1.5)
    family = [lambda xi: np.cos(0.5 * np.pi * xi) * (1.0 - xi ** 2),
              (2, lambda xi: xi ** 2 * np.exp(-xi))]
    a_list = (0.5, 0.25, 0.125)
    ok, parts = True, []
    for m in (0, 1):
        rep = elliptic_ratio(m, family, a_list, metric, p, npoints=800, tolerance=0.05)
        ok = ok and rep.pass_
        parts.append(f"m={m} sups " + ", ".join(f"{v:.4f}" for _, v in
                                                  sorted(rep.sup_by_a().items())))
    g = RadialGrid.make(800, 0.5)
    pa = p.with_width(0.5)
    ops = assemble_operator(metric, pa, 0, g)
    F = GridFunction(g, np.cos(np.pi * g.points) * (1.0 - (g.points / 0.5) ** 2))
    w = solve_elliptic(F, ops, pa)
    res = relative_residual(assemble_system(ops), w.values[:-1], F.values[:-1])
    ok = ok and res < 1e-10
    return ok, f"residual {res:.1e} (limit 1e-10); " + "; ".join(parts)


# 5 -------------------------------------------------------------------------------
def criterion_5():
    alpha, a = 1.5, 0.5
    p = TwistParams.from_alpha(4, alpha, a)
    exact = exact_model_eigenvalue(alpha, a, 0, 4)
    g4 = RadialGrid.make(400, a)
    lam4 = eigenmodes(model_operator(p, 0, g4), 1, p)[0][0]
    g8 = g4.refined()
    lam8, phi8 = eigenmodes(model_operator(p, 0, g8), 1, p)[0]
    rich = lam8 + (lam8 - lam4) / 3.0
    digits = max(abs(v - exact) / exact for v in (lam4, lam8, rich))
    slope = decay_slope(phi8, (g8.points[0], 1e-2 * a))
    ge = evolution_grid(800, a)
    ops = model_operator(p, 0, ge)
    lam, phi = eigenmodes(ops, 1, p)[0]
    traj = evolve(phi, phi.scaled(0.0), None, ops, 4.0, stride=20)
    omega, binw = dominant_frequency(traj.times, traj.u[:, 0, ge.size // 8])
    ok = digits < 5e-5 and abs(slope - alpha) <= 0.05 and abs(omega - np.sqrt(exact)) <= binw
    return ok, (f"lambda(400)={lam4:.6f} lambda(800)={lam8:.6f} Richardson={rich:.6f} "
                f"Bessel={exact:.6f} (max rel {digits:.1e}); slope {slope:.4f}; "
                f"omega {omega:.4f} vs sqrt(lambda) {np.sqrt(exact):.4f}, bin {binw:.3f}")


# 6 -------------------------------------------------------------------------------
def _drift_and_order():
    a = 0.5
    p = TwistParams.from_alpha(4, 1.5, a)
    g = evolution_grid(800, a)
    ops = model_operator(p, 0, g)
    lam, phi = eigenmodes(ops, 1, p)[0]
    T = 4.0
    traj = evolve(phi, phi.scaled(0.0), None, ops, T, stride=20)
    E = energy_history(traj).E
    periods = T * np.sqrt(lam) / (2.0 * np.pi)
    drift = float(np.max(np.abs(E - E[0])) / E[0]) / periods
    # order: a coarser grid and an eigenmode with omega dt of a few percent
    gc = evolution_grid(200, a, x_min_factor=1e-2)
    opc = model_operator(p, 0, gc)
    lam_c, phi_c = eigenmodes(opc, 40, p)[39]
    period = 2.0 * np.pi / np.sqrt(lam_c)
    dt0 = stable_step(opc)
    dts, drifts, sols = [], [], []
    for f in (1, 2, 4, 8):
        # a quarter-period offset makes u(T) first-order sensitive to phase error
        tr = evolve(phi_c, phi_c.scaled(0.0), None, opc, 20.25 * period, dt=dt0 / f, stride=1)
        Ec = energy_history(tr).E
        dts.append(tr.dt)
        drifts.append(np.max(np.abs(Ec - Ec[0])) / Ec[0])
        sols.append(tr.u[-1, 0])
    order = float(np.polyfit(np.log(dts), np.log(drifts), 1)[0])
    errs = [np.linalg.norm(s - sols[-1]) for s in sols[:-1]]
    sol_order = float(np.polyfit(np.log(dts[:-1]), np.log(errs), 1)[0])
    return drift, order, sol_order


def _forced_gronwall(metric, anti_damping: float):
    checks = []
    for a in (0.5, 0.25, 0.125):
        g = evolution_grid(400, a)
        p = TwistParams.from_alpha(4, 1.5, a)
        ops = assemble_operator(metric, p, 0, g)
        if anti_damping:
            # non-conservative first-order term whose size scales with the patch width
            ops.nodes["Bt"] = ops.nodes["Bt"] + anti_damping * a
        xi = g.points / a
        shape = np.sin(np.pi * xi) * xi ** 1.5
        shape[-1] = 0.0
        omega = 2.0 / a

        def coef(ell, t, order, omega=omega):
            return (np.cos(omega * np.asarray(t) + 0.5 * order * np.pi) * omega ** order)[None, :]

        # the growth run is unforced so the fitted c is not hidden by the source integral
        F = None if anti_damping else SeparableSource({0: shape[None, :] / a ** 2}, coef)
        u0 = GridFunction(g, shape)
        traj = evolve(u0, u0.scaled(0.0), F, ops, 4.0 * a, stride=10)
        checks.append(gronwall_check(energy_history(traj), p))
    return checks


def criterion_6():
    drift, order, sol_order = _drift_and_order()
    metric = ads_metric(4)
    conservative = _forced_gronwall(metric.perturbed("tx", 1, 2.0), 0.0)
    growing = _forced_gronwall(metric, 0.4)
    holds = all(c.pass_ for c in conservative + growing)
    stable = gronwall_stable(conservative) and gronwall_stable(growing)
    cs = ", ".join(f"{c.notes['fitted_c']:.4f}" for c in growing)
    ok = drift < 1e-8 and abs(order - 4.0) <= 0.3 and holds and stable
    return ok, (f"drift/period {drift:.1e} (limit 1e-8); drift order in dt {order:.2f} "
                f"(required 4 +- 0.3; solution order {sol_order:.2f}); Gronwall holds {holds}, "
                f"c on aAdS {conservative[0].notes['fitted_c']:.1e}, c with growth term [{cs}] "
                f"stable {stable}")


# 7 -------------------------------------------------------------------------------
SANDWICH_WIDTHS = (0.25, 0.125, 0.0625, 0.03125)


def criterion_7():
    metric = ads_metric(4)
    ok, parts = True, []
    for alpha in (0.5, 1.5):
        consts = {"vE": {}, "e1": {}, "e2": {}}
        for a in SANDWICH_WIDTHS:
            rng = np.random.default_rng(2024)
            g = RadialGrid.make(400, a)
            p = TwistParams.from_alpha(4, alpha, a)
            ops = {ell: assemble_operator(metric, p, ell, g) for ell in (0, 2)}
            ratios = {k: [] for k in consts}
            for i in range(50):
                ell = (0, 2)[i % 2]
                U = random_smooth_field(g, p, 4, rng, mode=ell).plain()[None, :].copy()
                V = random_smooth_field(g, p, 3, rng, mode=ell).plain()[None, :].copy()
                U[:, -1] = 0.0
                V[:, -1] = 0.0
                op = ops[ell]
                ratios["vE"].append(_energy_parts(U, V, op)[0] / tower_norm_sq(U, V, op, 0)[0])
                for m in (1, 2):
                    ratios[f"e{m}"].append(tower_energy(U, V, op, m)[0]
                                           / tower_norm_sq(U, V, op, m)[0])
            for k, vals in ratios.items():
                consts[k][a] = (min(vals), max(vals))
        for k, by_a in consts.items():
            widths = sorted(by_a)
            # each constant may move by at most 10% when a halves
            good = all(lo > 0 for lo, _ in by_a.values()) and all(
                abs(by_a[small][j] / by_a[big][j] - 1.0) <= 0.10
                for small, big in zip(widths[:-1], widths[1:]) for j in (0, 1))
            ok = ok and good
            span = [f"[{lo:.3f},{hi:.3f}]" for _, (lo, hi) in sorted(by_a.items())]
            parts.append(f"alpha={alpha} {k} {' '.join(span)}")
    return ok, "sandwich [lower, upper] for a = 1/32 .. 1/4: " + "; ".join(parts)


# 8 -------------------------------------------------------------------------------
def criterion_8():
    metric = ads_metric(4)
    ok, parts = True, []
    for alpha in (1.0, 1.5):
        p = TwistParams.from_alpha(4, alpha, 0.5)
        g = RadialGrid.make(800, 0.5)
        ops = assemble_operator(metric, p, 0, g)
        f = bump_datum(0, 1.5, 0.5)
        slopes = []
        for k in (1, 2, 3):
            rep = residual_slope(peel(f, k, ops, p), k, p, (g.points[0], 5e-3), 1.5, g)
            ok = ok and rep.pass_
            slopes.append(rep.ratios[0][1])
        gains = np.diff(slopes)
        ok = ok and bool(np.all(gains >= 1.9))
        parts.append(f"alpha={alpha} slopes " + ", ".join(f"{s:.4f}" for s in slopes)
                     + " gains " + ", ".join(f"{d:.3f}" for d in gains))
    return ok, "; ".join(parts)


# 9 -------------------------------------------------------------------------------
class SumProfile:
    """Sum of two time profiles, used to test superposition within one mode."""

    def __init__(self, first, second):
        self.parts = (first, second)
        self.max_order = min(first.max_order, second.max_order)
        self.amplitude = 1.0

    @property
    def support(self) -> tuple:
        return (min(q.support[0] for q in self.parts), max(q.support[1] for q in self.parts))

    def derivative(self, t, order: int = 0):
        return sum(q.derivative(t, order) for q in self.parts)

    def __call__(self, t):
        return self.derivative(t, 0)


def criterion_9():
    metric = ads_metric(4)
    p = TwistParams.from_alpha(4, 1.5, 0.5)
    f = bump_datum(0, 1.5, 0.5)
    g = evolution_grid(400, 0.5)
    coarse = solve_linear_ibvp(f, 2, 1, metric, p, 3.0, grid=g)
    fine = solve_linear_ibvp(f, 2, 1, metric, p, 3.0, grid=g.refined())
    e_c, e_f = coarse.boundary_error(), fine.boundary_error()
    trace = max(coarse.remainder_trace(), fine.remainder_trace())
    caus = coarse.reports["causality"]
    f2 = bump_datum(0, 1.8, 0.4, amplitude=-0.7)
    both = BoundaryDatum([DatumMode(0, SumProfile(f.modes[0].profile, f2.modes[0].profile))])
    s1 = coarse.total_field()
    s2 = solve_linear_ibvp(f2, 2, 1, metric, p, 3.0, grid=g).total_field()
    s12 = solve_linear_ibvp(both, 2, 1, metric, p, 3.0, grid=g).total_field()
    lin = float(np.max(np.abs(s12 - s1 - s2)) / np.max(np.abs(s12)))
    ok = (e_c < 1e-3 and e_f <= 0.5 * e_c and trace < 1e-3 and caus.pass_
          and not caus.notes["vacuous"] and lin < 1e-10)
    return ok, (f"boundary error {e_c:.2e} -> {e_f:.2e} on refinement (ratio {e_f / e_c:.2f}); "
                f"remainder trace {trace:.1e}; causality sup {caus.notes['sup']:.1e}; "
                f"linearity defect {lin:.1e}")


# 10 ------------------------------------------------------------------------------
def criterion_10():
    metric = ads_metric(4)
    p = TwistParams.from_alpha(4, 1.5, 0.5)
    m, k = 1, 2
    nl = NonlinearitySpec(nonlinear_exponent_threshold(p, m) + 0.5)
    f = bump_datum(0, 0.6, 0.4)
    tol = 1e-8
    kw = dict(npoints=400)
    sol, log = solve_nonlinear_ibvp(f.scaled(1e-3), k, m, nl, metric, p, 1.5, tol=tol, **kw)
    ratios = [r for _, r in log[1:]]
    small_ok = sol.iterations <= 6 and all(r < 0.5 for r in ratios) and \
        sol.final_residual < 10.0 * tol
    blew = None
    try:
        solve_nonlinear_ibvp(f.scaled(100.0), k, m, nl, metric, p, 1.5, tol=tol, **kw)
    except NoContraction as exc:
        finite = all(np.isfinite(exc.details.get("ratios", [np.inf])))
        blew = exc.__cause__ is None and finite
    amps = [1.0, 3.0, 10.0, 30.0, 100.0]
    thresholds = []
    for T in (1.25, 1.5, 2.0):
        out = contraction_threshold(f, k, m, nl, metric, p, T, amps, tol=tol, **kw)
        thresholds.append(out["threshold"])
    monotone = all(thresholds[i] >= thresholds[i + 1] for i in range(2))
    ok = small_ok and bool(blew) and monotone
    return ok, (f"small datum: {sol.iterations} iterations, ratios "
                + ", ".join(f"{r:.1e}" for r in ratios)
                + f", residual {sol.final_residual:.1e}; NoContraction before blow-up {blew}; "
                f"thresholds for T = 1.25, 1.5, 2 {thresholds}")


# 11 ------------------------------------------------------------------------------
def criterion_11():
    ok, parts = True, []
    for alpha in (0.5, 1.5):
        rng = np.random.default_rng(99)
        g = RadialGrid.make(800, 0.5)
        p = TwistParams.from_alpha(4, alpha, 0.5)
        fields = [random_smooth_field(g, p, 3, rng, mode=ell) for ell in (0, 1, 2, 0)]
        rep = morrey_report(fields, 3, p, (g.points[0], 1e-2), tolerance=0.1)
        pairs = [([fields[0], fields[1]], [fields[2]]), ([fields[3]], [fields[1]])]
        mos = moser_scan(pairs, 3, p, bound=MOSER_BOUND)
        ok = ok and rep.pass_ and mos.pass_
        fails = sorted({(i, j, round(need, 2), round(s, 2))
                        for _, i, j, s, need in rep.notes["failures"]})
        parts.append(f"alpha={alpha} Morrey {'pass' if rep.pass_ else 'fail'} "
                     f"(i, j, claimed, observed) {fails}; Moser sup {mos.sup_ratio:.2e} "
                     f"(frozen bound {MOSER_BOUND})")
    return ok, "; ".join(parts)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
            11: criterion_11}


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num):
    passed, detail = CRITERIA[num]()
    record(num, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    for num in sorted(CRITERIA):
        record(num, *CRITERIA[num]())
