"""Suite runners and run orchestration behind the command line.

Each suite writes its CSV reports into the artifact directory and returns a
record ``{"pass": bool, ...}`` that lands in ``summary.json``.

Summary JSON schema (``summary.json`` at the artifact root)::

    {
      "schema": 1,
      "status": "passed" | "checks_failed" | "config_error" | "module_error",
      "exit_code": 0 | 1 | 2 | 3,
      "config": "<path>",
      "backend": "compiled" | "python",
      "suites": {"<suite>": {"pass": bool, ...}},
      "error": null | {"code": "HWnnn", "type": str, "message": str,
                       "details": {...}, "suite": str}
    }
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import kernels
from .boundary import BoundaryDatum, BumpProfile, DatumMode, peel, residual_slope
from .config import RunConfig
from .elliptic import eigenmodes, elliptic_ratio, exact_model_eigenvalue
from .errors import HolowaveError
from .evolution import (dominant_frequency, energy_history, energy_tower, evolve,
                        gronwall_check)
from .geometry import assemble_operator, model_operator
from .grid import RadialGrid
from .holography import (NonlinearitySpec, causality_check, evolution_grid,
                         nonlinear_exponent_threshold, solve_linear_ibvp,
                         solve_nonlinear_ibvp)
from .io import write_csv, write_json
from .series import PowerSeries
from .twisted import (HARDY_CHECKS, decay_slope, hardy_report, moser_scan, morrey_report,
                      random_smooth_field)

EXIT_PASS, EXIT_CHECKS, EXIT_CONFIG, EXIT_MODULE = 0, 1, 2, 3

DEFAULT_A_LIST = [1.0, 0.5, 0.25, 0.125]

# test families as functions of xi = x / a on (0, 1]
HARDY_FAMILY = {
    "cos": lambda xi: np.cos(0.5 * np.pi * xi),
    "poly": lambda xi: (1.0 - xi) ** 2 * (1.0 + xi),
    "gauss": lambda xi: np.exp(-8.0 * (xi - 0.4) ** 2),
}
ELLIPTIC_FAMILY = {
    "cos": lambda xi: np.cos(0.5 * np.pi * xi) * (1.0 - xi ** 2),
    "bump": lambda xi: xi ** 2 * np.exp(-xi),
}


def _grid(cfg: RunConfig, a: float | None = None) -> RadialGrid:
    g = cfg.grid
    return RadialGrid.make(int(g["N"]), float(a if a is not None else cfg.problem["a"]),
                           g["grading"], float(g["ratio"]), float(g["x_min_factor"]))


def _evo_grid(cfg: RunConfig) -> RadialGrid:
    g = cfg.grid
    return evolution_grid(int(g["N"]), float(cfg.problem["a"]),
                          float(g["evolution_x_min_factor"]), float(g["ratio"]))


def _ops(cfg: RunConfig, ell: int, grid: RadialGrid):
    p = cfg.params().with_width(grid.a)
    metric = cfg.metric()
    if metric is None:
        return model_operator(p, ell, grid)
    return assemble_operator(metric, p, ell, grid)


def build_datum(cfg: RunConfig) -> BoundaryDatum:
    modes = []
    for i, spec in enumerate(cfg.datum["modes"]):
        prof = BumpProfile(float(spec.get("center", 1.5)), float(spec.get("width", 0.5)),
                           float(spec.get("amplitude", 1.0)))
        modes.append(DatumMode(int(spec.get("ell", 0)), prof, i))
    return BoundaryDatum(modes)


def _report_rows(rep, label: str) -> list:
    return [[label, params[0], "|".join(str(v) for v in params[1:]), r]
            for params, r in rep.ratios]


# suites -------------------------------------------------------------------------
def suite_hardy(cfg: RunConfig, out: Path) -> dict:
    opt = cfg.options("hardy")
    p = cfg.params()
    s = float(opt.get("s", 0.0))
    r = float(opt.get("r", 1.0))
    a_list = [float(v) for v in opt.get("a_list", DEFAULT_A_LIST)]
    names = sorted(HARDY_FAMILY)
    reps = hardy_report([HARDY_FAMILY[k] for k in names], s, r, a_list, p,
                        npoints=int(cfg.grid["N"]))
    rows = []
    for name in HARDY_CHECKS:
        rows += _report_rows(reps[name], name)
    write_csv(out / "hardy.csv", ["check", "a", "member", "ratio"], rows)
    checks = {name: {"pass": reps[name].pass_, "sup_by_a": _sups(reps[name])}
              for name in HARDY_CHECKS}
    return {"pass": all(c["pass"] for c in checks.values()), "checks": checks,
            "s": s, "r": r}


def _sups(rep) -> dict:
    return {format(a, "g"): v for a, v in sorted(rep.sup_by_a().items())}


def _random_fields(cfg: RunConfig, count: int, m: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    grid = _grid(cfg)
    p = cfg.params().with_width(grid.a)
    return [random_smooth_field(grid, p, m, rng) for _ in range(count)]


def suite_morrey(cfg: RunConfig, out: Path) -> dict:
    opt = cfg.options("morrey")
    m = int(opt.get("m", 3))
    fields = _random_fields(cfg, int(opt.get("fields", 4)), m, int(opt.get("seed", 7)))
    grid = fields[0].grid
    window = (float(grid.points[0]), float(opt.get("window", 0.02)) * grid.a)
    rep = morrey_report(fields, m, cfg.params().with_width(grid.a), window,
                        float(opt.get("tolerance", 0.1)))
    rows = [[f, i, j, need, slope] for (f, i, j, need), slope in rep.ratios]
    write_csv(out / "morrey.csv", ["field", "i", "j", "required", "slope"], rows)
    return {"pass": rep.pass_, "failures": [list(f) for f in rep.notes["failures"]]}


def suite_moser(cfg: RunConfig, out: Path) -> dict:
    opt = cfg.options("moser")
    m = int(opt.get("m", 3))
    bound = float(opt.get("bound", 10.0))
    fields = _random_fields(cfg, 2 * int(opt.get("pairs", 2)), m, int(opt.get("seed", 11)))
    pairs = [([fields[2 * i]], [fields[2 * i + 1]]) for i in range(len(fields) // 2)]
    rep = moser_scan(pairs, m, cfg.params().with_width(fields[0].grid.a), bound)
    rows = [list(params) + [r] for params, r in rep.ratios]
    write_csv(out / "moser.csv", ["pair", "k1", "j1", "k2", "j2", "ratio"], rows)
    return {"pass": rep.pass_, "sup_ratio": rep.sup_ratio, "bound": bound}


def suite_elliptic(cfg: RunConfig, out: Path) -> dict:
    opt = cfg.options("elliptic")
    a_list = [float(v) for v in opt.get("a_list", [0.5, 0.25, 0.125])]
    names = sorted(ELLIPTIC_FAMILY)
    family = [ELLIPTIC_FAMILY[k] for k in names]
    rows, checks = [], {}
    for m in [int(v) for v in opt.get("orders", [0, 1])]:
        rep = elliptic_ratio(m, family, a_list, cfg.metric(), cfg.params(),
                             npoints=int(cfg.grid["N"]))
        rows += _report_rows(rep, rep.name)
        checks[rep.name] = {"pass": rep.pass_, "sup_by_a": _sups(rep),
                            "spread_ok": rep.notes["spread_ok"]}
    write_csv(out / "elliptic.csv", ["check", "a", "member", "ratio"], rows)
    return {"pass": all(c["pass"] for c in checks.values()), "checks": checks}


def suite_eigen(cfg: RunConfig, out: Path) -> dict:
    opt = cfg.options("eigen")
    count = int(opt.get("count", 3))
    tol = float(opt.get("tolerance", 1e-3))
    slope_tol = float(opt.get("slope_tolerance", 0.05))
    grid = _grid(cfg)
    p = cfg.params().with_width(grid.a)
    rows, ok = [], True
    for ell in [int(v) for v in opt.get("modes", [0])]:
        ops = model_operator(p, ell, grid)
        for idx, (lam, phi) in enumerate(eigenmodes(ops, count, p), start=1):
            exact = exact_model_eigenvalue(p.alpha, grid.a, ell, p.n, idx)
            window = (float(grid.points[0]), 1e-2 * grid.a)
            slope = decay_slope(phi, window)
            rel = abs(lam - exact) / exact
            ok = ok and rel < tol and abs(slope - p.alpha) < slope_tol
            rows.append([ell, idx, lam, exact, rel, slope])
    write_csv(out / "eigen.csv", ["ell", "index", "eigenvalue", "exact", "relative_error",
                                  "decay_slope"], rows)
    return {"pass": bool(ok), "tolerance": tol}


def suite_evolve(cfg: RunConfig, out: Path) -> dict:
    """Free evolution of the first eigenfield: energy, Gronwall fit, frequency, decay."""
    opt = cfg.options("evolve")
    grid = _evo_grid(cfg)
    p = cfg.params().with_width(grid.a)
    ops = model_operator(p, 0, grid)
    lam, phi = eigenmodes(ops, 1, p)[0]
    T = float(cfg.evolution["T"])
    traj = evolve(phi, phi.scaled(0.0), None, ops, T, stride=int(cfg.evolution["stride"]),
                  cfl=float(cfg.evolution["cfl"]))
    k, m = int(opt.get("k", 1)), int(opt.get("m", 1))
    rep = energy_tower(traj, k, m)
    chk = gronwall_check(rep, p)
    drift = float(np.max(np.abs(rep.E - rep.E[0])) / rep.E[0])
    periods = max(T * np.sqrt(lam) / (2.0 * np.pi), 1.0)
    omega, resolution = dominant_frequency(traj.times, traj.u[:, 0, grid.size // 8])
    window = (float(grid.points[0]), 5e-2 * grid.a)
    slope = decay_slope(phi, window)
    header = ["t", "E"] + sorted(rep.towers) + ["fitted_c"]
    rows = [[t, e] + [rep.towers[name][i] for name in sorted(rep.towers)] + [rep.fitted_c]
            for i, (t, e) in enumerate(zip(rep.times, rep.E))]
    write_csv(out / "energy.csv", header, rows)
    sel = grid.points <= window[1]
    write_csv(out / "decay.csv", ["x", "value", "slope"],
              [[x, v, slope] for x, v in zip(grid.points[sel], phi.values[sel])])
    drift_tol = float(opt.get("drift_per_period", 1e-8))
    freq_ok = abs(omega - np.sqrt(lam)) <= resolution
    ok = drift / periods < drift_tol and chk.pass_ and freq_ok
    return {"pass": bool(ok), "drift_per_period": drift / periods, "fitted_c": rep.fitted_c,
            "omega": omega, "sqrt_lambda": float(np.sqrt(lam)), "decay_slope": slope,
            "backend": kernels.BACKEND, "dt": traj.dt}


def suite_peel(cfg: RunConfig, out: Path) -> dict:
    f = build_datum(cfg)
    k = int(cfg.peeling["k"])
    grid = _grid(cfg)
    p = cfg.params().with_width(grid.a)
    ops = {dm.ell: _ops(cfg, dm.ell, grid) for dm in f.modes}
    peeled = peel(f, k, ops, p, float(cfg.peeling["a0_factor"]))
    rows = [[layer.mode, layer.j, layer.offset, layer.log_power, layer.exponent]
            for layer in peeled.layers]
    write_csv(out / "peel.csv", ["mode", "j", "offset", "log_power", "exponent"], rows)
    opt = cfg.options("peel")
    window = (float(grid.points[0]), float(opt.get("window", 1e-2)) * grid.a)
    t = float(opt.get("t", f.support[0] + 0.5 * (f.support[1] - f.support[0])))
    rep = residual_slope(peeled, k, p, window, t, grid)
    write_csv(out / "peel_residual.csv", ["mode", "required", "slope"],
              [[mode, need, s] for (mode, need), s in rep.ratios])
    return {"pass": rep.pass_, "layers": len(rows)}


def _linear(cfg: RunConfig):
    f = build_datum(cfg)
    grid = _evo_grid(cfg)
    return solve_linear_ibvp(f, int(cfg.peeling["k"]), int(cfg.peeling["m"]), cfg.metric(),
                             cfg.params().with_width(grid.a), float(cfg.evolution["T"]),
                             grid=grid, stride=int(cfg.evolution["stride"]),
                             a0_factor=float(cfg.peeling["a0_factor"]))


def suite_holo_linear(cfg: RunConfig, out: Path) -> dict:
    opt = cfg.options("holo-linear")
    sol = _linear(cfg)
    sol.save(out / "holo-linear")
    tol = float(opt.get("boundary_tolerance", 1e-2))
    summ = sol.summary()
    ok = bool(summ["causality_pass"]) and summ["boundary_error"] < tol
    return {"pass": ok, **summ, "boundary_tolerance": tol}


def suite_causality(cfg: RunConfig, out: Path) -> dict:
    opt = cfg.options("causality")
    sol = _linear(cfg)
    rep = causality_check(sol, build_datum(cfg).support[0], float(opt.get("threshold", 1e-10)))
    write_csv(out / "causality.csv", ["t", "sup"], [[p[0], r] for p, r in rep.ratios])
    return {"pass": rep.pass_, "vacuous": rep.notes["vacuous"],
            "sup": rep.notes.get("sup", 0.0)}


def suite_holo_nonlinear(cfg: RunConfig, out: Path) -> dict:
    opt = cfg.options("holo-nonlinear")
    p = cfg.params()
    m = int(cfg.peeling["m"])
    nl_cfg = cfg.nonlinearity
    q = nl_cfg["q"]
    if q is None:
        q = nonlinear_exponent_threshold(p, m) + 0.5
    gamma = nl_cfg["gamma_hat"]
    gamma = PowerSeries(gamma) if isinstance(gamma, list) else float(gamma)
    nl = NonlinearitySpec(float(q), gamma, bool(nl_cfg["enabled"]))
    grid = _evo_grid(cfg)
    sol, log = solve_nonlinear_ibvp(build_datum(cfg), int(cfg.peeling["k"]), m, nl,
                                    cfg.metric(), p.with_width(grid.a),
                                    float(cfg.evolution["T"]),
                                    max_iter=int(opt.get("max_iter", 12)),
                                    tol=float(opt.get("tol", 1e-8)), grid=grid,
                                    stride=int(cfg.evolution["stride"]),
                                    a0_factor=float(cfg.peeling["a0_factor"]))
    sol.save(out / "holo-nonlinear")
    summ = sol.summary()
    return {"pass": bool(sol.converged and summ["causality_pass"]), **summ}


SUITE_RUNNERS = {
    "hardy": suite_hardy,
    "morrey": suite_morrey,
    "moser": suite_moser,
    "elliptic": suite_elliptic,
    "eigen": suite_eigen,
    "evolve": suite_evolve,
    "peel": suite_peel,
    "holo-linear": suite_holo_linear,
    "holo-nonlinear": suite_holo_nonlinear,
    "causality": suite_causality,
}


# orchestration ------------------------------------------------------------------
def _summary(status: str, code: int, source: str, suites: dict, error: dict | None) -> dict:
    return {"schema": 1, "status": status, "exit_code": code, "config": source,
            "backend": kernels.BACKEND, "suites": suites, "error": error}


def write_error_summary(out: Path, source: str, exc: HolowaveError, code: int) -> int:
    status = "config_error" if code == EXIT_CONFIG else "module_error"
    write_json(out / "summary.json", _summary(status, code, source, {}, exc.to_dict()))
    return code


def run_suites(cfg: RunConfig, out: Path) -> int:
    """Run every declared suite in order and write ``summary.json``.

    A module error stops the run; the summary then records the suites that
    finished and the error with its code.
    """
    out.mkdir(parents=True, exist_ok=True)
    results: dict = {}
    for name in cfg.suites:
        try:
            results[name] = SUITE_RUNNERS[name](cfg, out)
        except HolowaveError as exc:
            err = exc.to_dict()
            err["suite"] = name
            write_json(out / "summary.json",
                       _summary("module_error", EXIT_MODULE, cfg.source, results, err))
            return EXIT_MODULE
    ok = all(r["pass"] for r in results.values())
    code = EXIT_PASS if ok else EXIT_CHECKS
    write_json(out / "summary.json",
               _summary("passed" if ok else "checks_failed", code, cfg.source, results, None))
    return code
