"""Method-of-lines evolution of the homogeneous-boundary wave problem.

Each mode obeys the first-order system

    u_t = v,    v_t = -K u + B v + F(t),

where ``K = -L_g`` is the tridiagonal elliptic operator of
:mod:`holowave.elliptic` (zero trace at ``x = 0``, ``u(a) = 0``) and
``B v = Btx (D - alpha/x) v + Bt v`` collects the first-order time terms.
In terms of the normal form, ``F = -G`` when ``P_g u = G``.  Stepping is
classical RK4 in the compiled core (:mod:`holowave.kernels`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .elliptic import EllipticSystem, assemble_system, node_derivative_matrix
from .errors import CFLViolation, DerivativeBudget, InsufficientHistory, NaNDetected
from .finite_diff import history_derivative
from .geometry import OperatorCoefficients
from .grid import RadialGrid
from .twisted import EstimateReport, GridFunction, TwistParams, stagger

# RK4 is stable on the imaginary axis up to |z| = 2 sqrt(2)
CFL_LIMIT = 2.0 * np.sqrt(2.0)
DEFAULT_CFL = 1.0
GRONWALL_FLOOR = 1e-6


# sources -------------------------------------------------------------------------
class SeparableSource:
    """Source ``F(x, t) = sum_i q_i(t) P_i(x)`` for each mode.

    Parameters
    ----------
    profiles : dict
        ``ell -> array (nprof, N)`` of nodal profiles.
    coefficients : callable
        ``coefficients(ell, times, order)`` returns ``q^(order)`` with shape
        ``(nprof, len(times))``.
    max_order : int
        Highest time derivative the coefficients support.
    """

    def __init__(self, profiles: dict, coefficients: Callable, max_order: int = 40):
        self.profiles = {int(k): np.asarray(v, dtype=float) for k, v in profiles.items()}
        self.coefficients = coefficients
        self.max_order = max_order

    @property
    def modes(self) -> list:
        return sorted(self.profiles)

    def chunk(self, ell: int, times: np.ndarray) -> tuple:
        prof = self.profiles.get(ell)
        if prof is None:
            return np.zeros((0, 0)), np.zeros((times.size, 0))
        q = np.asarray(self.coefficients(ell, times, 0), dtype=float)
        return prof, np.ascontiguousarray(q.T)

    def values(self, ell: int, t: float, order: int = 0) -> np.ndarray | None:
        if order > self.max_order:
            raise DerivativeBudget(f"source supports {self.max_order} time derivatives",
                                   requested=order, available=self.max_order)
        prof = self.profiles.get(ell)
        if prof is None:
            return None
        q = np.asarray(self.coefficients(ell, np.array([t]), order), dtype=float)[:, 0]
        return q @ prof


class SampledSource:
    """Source known on uniformly spaced time levels, cubic Lagrange in time.

    Parameters
    ----------
    t0, spacing : float
        Time of the first level and level spacing.
    levels : dict
        ``ell -> array (nlev, N)``.
    """

    def __init__(self, t0: float, spacing: float, levels: dict):
        self.t0 = float(t0)
        self.spacing = float(spacing)
        self.levels = {int(k): np.asarray(v, dtype=float) for k, v in levels.items()}
        self.max_order = 3

    @property
    def modes(self) -> list:
        return sorted(self.levels)

    def _weights(self, times: np.ndarray, nlev: int) -> tuple:
        width = min(4, nlev)
        s = (np.asarray(times, dtype=float) - self.t0) / self.spacing
        start = np.clip(np.floor(s).astype(int) - 1, 0, nlev - width)
        w = np.ones((s.size, width))
        for j in range(width):
            for i in range(width):
                if i != j:
                    w[:, j] *= (s - (start + i)) / (j - i)
        return start, w

    def chunk(self, ell: int, times: np.ndarray) -> tuple:
        lev = self.levels.get(ell)
        if lev is None:
            return np.zeros((0, 0)), np.zeros((times.size, 0))
        start, w = self._weights(times, lev.shape[0])
        lo, hi = int(start.min()), int(start.max()) + w.shape[1]
        q = np.zeros((times.size, hi - lo))
        for j in range(w.shape[1]):
            np.add.at(q, (np.arange(times.size), start + j - lo), w[:, j])
        return lev[lo:hi], q

    def values(self, ell: int, t: float, order: int = 0) -> np.ndarray | None:
        if order > 0:
            raise DerivativeBudget("sampled sources carry no time derivatives at a point",
                                   requested=order, available=0)
        lev = self.levels.get(ell)
        if lev is None:
            return None
        start, w = self._weights(np.array([t]), lev.shape[0])
        return w[0] @ lev[start[0] : start[0] + w.shape[1]]


# state and trajectory ------------------------------------------------------------
@dataclass
class EvolutionState:
    """Mode profiles of ``u`` and ``u_t`` at time ``t``."""

    t: float
    u: list
    u_t: list


@dataclass
class Trajectory:
    """Stored levels of an evolution.

    ``u`` and ``u_t`` have shape ``(levels, modes, N)``.
    """

    grid: RadialGrid
    params: TwistParams
    modes: list
    times: np.ndarray
    u: np.ndarray
    u_t: np.ndarray
    dt: float
    stride: int
    ops: dict
    source: object = None
    backend: str = "rk4"

    def mode_index(self, ell: int) -> int:
        return self.modes.index(ell)

    def state(self, level: int) -> EvolutionState:
        mk = lambda arr: [GridFunction(self.grid, arr[level, i].copy(), mode=ell)
                          for i, ell in enumerate(self.modes)]
        return EvolutionState(float(self.times[level]), mk(self.u), mk(self.u_t))

    def sup_norm(self) -> np.ndarray:
        """Sup over modes and nodes of ``|u|`` at each stored level."""
        return np.max(np.abs(self.u), axis=(1, 2))


def _as_mode_list(fields) -> list:
    return [fields] if isinstance(fields, GridFunction) else list(fields)


def _ops_by_mode(ops, modes) -> dict:
    if isinstance(ops, OperatorCoefficients):
        return {ell: (ops if ops.mode == ell else ops.with_mode(ell)) for ell in modes}
    return {ell: ops[ell] for ell in modes}


def damping_system(ops: OperatorCoefficients) -> tuple | None:
    """Tridiagonal ``B = Btx (D - alpha/x) + Bt`` on the interior nodes, or ``None``."""
    if ops.model:
        return None
    nint = ops.grid.size - 1
    btx = ops.nodes["Btx"][:nint]
    bt = ops.nodes["Bt"][:nint]
    if not (np.any(btx) or np.any(bt)):
        return None
    x = ops.grid.points[:nint]
    dl, dd, du = node_derivative_matrix(ops.grid, ops.alpha, nint)
    diag = btx * (dd - ops.alpha / x) + bt
    return btx[1:] * dl, diag, btx[:-1] * du


def gershgorin_bound(system: EllipticSystem) -> float:
    """Upper bound on the spectral radius of ``K``."""
    radius = np.abs(system.diag).copy()
    radius[:-1] += np.abs(system.upper)
    radius[1:] += np.abs(system.lower)
    return float(np.max(radius))


def stable_step(ops, modes: Sequence[int] = (0,), cfl: float = DEFAULT_CFL) -> float:
    """Time step ``cfl / sqrt(rho(K))`` with ``rho`` the Gershgorin bound over ``modes``."""
    by_mode = _ops_by_mode(ops, list(modes))
    rho = max(gershgorin_bound(assemble_system(op)) for op in by_mode.values())
    return cfl / np.sqrt(rho)


def evolve(u0, u1, F, ops, T: float, dt: float | None = None, stride: int = 1,
           cfl: float = DEFAULT_CFL, backend: str = "rk4") -> Trajectory:
    """Evolve ``u_tt + K u - B u_t = F`` from ``(u0, u1)`` on ``[0, T]``.

    Parameters
    ----------
    u0, u1 : GridFunction or sequence of GridFunction
        Initial profiles per mode; they must vanish at the Dirichlet node.
    F : SeparableSource, SampledSource or None
        Source term.
    ops : OperatorCoefficients or dict
        Operator per mode.
    T : float
        Final time.
    dt : float, optional
        Time step; by default ``cfl / sqrt(rho(K))``.  The step is shrunk so
        that a whole number of strides fits in ``[0, T]``.
    stride : int
        Steps between stored levels.
    backend : {'rk4', 'galerkin'}
        ``galerkin`` uses the exact eigen-expansion of the model operator
        (cross-validation only; needs ``F = None``).

    Raises
    ------
    CFLViolation
        When ``dt * sqrt(rho(K))`` exceeds the RK4 stability limit.
    NaNDetected
        With the first offending step index.
    """
    u0, u1 = _as_mode_list(u0), _as_mode_list(u1)
    modes = [f.mode for f in u0]
    if [f.mode for f in u1] != modes:
        raise ValueError("u0 and u1 must list the same modes")
    grid = u0[0].grid
    for f in u0 + u1:
        grid.check_same(f.grid)
        if f.plain()[-1] != 0.0:
            raise ValueError("initial data must vanish at x = a")
    by_mode = _ops_by_mode(ops, modes)
    params = next(iter(by_mode.values())).params
    systems = {ell: assemble_system(op) for ell, op in by_mode.items()}
    rho = max(gershgorin_bound(s) for s in systems.values())
    if dt is None:
        dt = cfl / np.sqrt(rho)
    if dt * np.sqrt(rho) > CFL_LIMIT:
        raise CFLViolation(f"dt = {dt:.3g} exceeds the RK4 limit {CFL_LIMIT / np.sqrt(rho):.3g}",
                           dt=dt, limit=CFL_LIMIT / np.sqrt(rho))
    nlev = max(1, int(np.ceil(T / (dt * stride) - 1e-12)))
    nsteps = nlev * stride
    dt = T / nsteps
    times = dt * stride * np.arange(nlev + 1)
    nint = grid.size - 1
    U = np.zeros((nlev + 1, len(modes), grid.size))
    V = np.zeros_like(U)
    for i, (a, b) in enumerate(zip(u0, u1)):
        U[0, i], V[0, i] = a.plain(), b.plain()
    if backend == "galerkin":
        if F is not None:
            raise ValueError("the eigen-expansion backend handles only F = None")
        for i, ell in enumerate(modes):
            U[:, i, :nint], V[:, i, :nint] = _galerkin(systems[ell], U[0, i, :nint],
                                                       V[0, i, :nint], times)
        return Trajectory(grid, params, modes, times, U, V, dt, stride, by_mode, F, backend)
    if backend != "rk4":
        raise ValueError(f"unknown backend {backend!r}")
    empty = np.zeros(0)
    for i, ell in enumerate(modes):
        s = systems[ell]
        damp = damping_system(by_mode[ell])
        blo, bdi, bup = damp if damp is not None else (empty, empty, empty)
        u = U[0, i, :nint].copy()
        v = V[0, i, :nint].copy()
        for lev in range(nlev):
            half_times = times[lev] + 0.5 * dt * np.arange(2 * stride + 1)
            if F is None:
                prof, qtab = np.zeros((0, nint)), np.zeros((half_times.size, 0))
            else:
                prof, qtab = F.chunk(ell, half_times)
                if prof.shape[0] == 0:
                    prof, qtab = np.zeros((0, nint)), np.zeros((half_times.size, 0))
                else:
                    prof = np.ascontiguousarray(prof[:, :nint])
            bad = kernels.rk4_steps(s.lower, s.diag, s.upper, blo, bdi, bup, u, v,
                                    prof, np.ascontiguousarray(qtab), dt, stride)
            if bad >= 0:
                raise NaNDetected("non-finite value in the evolution",
                                  step=int(lev * stride + bad), mode=ell)
            U[lev + 1, i, :nint] = u
            V[lev + 1, i, :nint] = v
    return Trajectory(grid, params, modes, times, U, V, dt, stride, by_mode, F, backend)


def _galerkin(system: EllipticSystem, u0: np.ndarray, u1: np.ndarray, times: np.ndarray):
    """Exact evolution in the eigenbasis of a symmetrisable ``K``."""
    d, e = system.symmetric_part()
    vals, vecs = eigh_tridiagonal(d, e)
    sw = np.sqrt(system.weights)
    c0 = vecs.T @ (sw * u0)
    c1 = vecs.T @ (sw * u1)
    om = np.sqrt(np.maximum(vals, 0.0))
    ph = np.outer(times, om)
    safe = np.where(om > 0, om, 1.0)
    sin_term = np.where(om > 0, np.sin(ph) / safe, times[:, None])
    cu = c0 * np.cos(ph) + c1 * sin_term
    cv = -c0 * om * np.sin(ph) + c1 * np.cos(ph)
    return (cu @ vecs.T) / sw, (cv @ vecs.T) / sw


# energies ------------------------------------------------------------------------
def _energy_parts(U: np.ndarray, V: np.ndarray, ops: OperatorCoefficients) -> np.ndarray:
    """Energy of stacked nodal levels ``(levels, N)`` for one mode (in ``xi`` units)."""
    grid = ops.grid
    st = stagger(grid, ops.alpha)
    a = grid.a
    lam = ops.eigenvalue
    W = U * st.xa
    DU = st.coef * np.diff(np.concatenate([np.zeros((U.shape[0], 1)), W], axis=1), axis=1)
    if ops.model:
        b_cell = 1.0
        g_node = 1.0
    else:
        b_cell = ops.cells["A2"]
        g_node = ops.nodes["Ath"]
    Om, om = st.node_w, st.cell_w
    e = (V * V) @ Om + (b_cell * DU * DU) @ om + lam * ((g_node * U * U) @ Om)
    return e / a ** 2


def energy(state: EvolutionState, ops, p: TwistParams) -> float:
    """Energy ``E[v]`` of a state, measured in the rescaled variable ``xi = x / a``.

    ``E = a^-2 sum_l (||u_t||^2 + <b D u, D u> + lambda <gamma u, u>)`` with
    ``b = A2`` and ``gamma = Ath`` (both one for the model operator).
    """
    by_mode = _ops_by_mode(ops, [f.mode for f in state.u])
    total = 0.0
    for u, v in zip(state.u, state.u_t):
        total += float(_energy_parts(u.plain()[None, :], v.plain()[None, :], by_mode[u.mode])[0])
    return total


@dataclass
class EnergyReport:
    """Energy history of a trajectory and optional towers."""

    times: np.ndarray
    E: np.ndarray
    towers: dict = field(default_factory=dict)
    fitted_c: float | None = None
    source_integral: np.ndarray | None = None
    a: float = 1.0
    notes: dict = field(default_factory=dict)


def source_norms(traj: Trajectory) -> np.ndarray:
    """``||F(t)||`` in ``L^2`` of ``xi`` at the stored levels."""
    out = np.zeros(traj.times.size)
    if traj.source is None:
        return out
    w = traj.grid.weights
    a = traj.grid.a
    for lev, t in enumerate(traj.times):
        tot = 0.0
        for ell in traj.modes:
            vals = traj.source.values(ell, float(t))
            if vals is not None:
                vals = np.asarray(vals)[: w.size].copy()
                vals[-1] = 0.0
                tot += float(np.sum(w * vals * vals))
        out[lev] = np.sqrt(tot) / a
    return out


def energy_history(traj: Trajectory) -> EnergyReport:
    """Energy at every stored level with the accumulated source norm."""
    E = np.zeros(traj.times.size)
    for i, ell in enumerate(traj.modes):
        E += _energy_parts(traj.u[:, i], traj.u_t[:, i], traj.ops[ell])
    fn = source_norms(traj)
    integral = cumulative_trapezoid(fn, traj.times, initial=0.0)
    return EnergyReport(traj.times.copy(), E, source_integral=integral, a=traj.grid.a)


def _time_derivatives(traj: Trajectory, order: int) -> tuple:
    """``(d^order u, d^(order+1) u)`` at the stored levels."""
    spacing = traj.times[1] - traj.times[0]
    if order == 0:
        return traj.u, traj.u_t
    du = history_derivative(traj.u_t, spacing, order - 1) if order > 1 else traj.u_t
    dv = history_derivative(traj.u_t, spacing, order)
    return du, dv


def _xi_ordered(values: np.ndarray, grid: RadialGrid, alpha: float, m: int) -> list:
    """Ordered twisted derivatives ``D^(j)`` of stacked nodal levels, ``j <= m``.

    Returns ``(array, on_cells)`` pairs; derivatives are in ``x`` units.
    """
    st = stagger(grid, alpha)
    out = [(values, False)]
    cur = values
    for j in range(1, m + 1):
        if j % 2 == 1:
            W = cur * st.xa
            cur = st.coef * np.diff(np.concatenate([np.zeros((cur.shape[0], 1)), W], axis=1),
                                    axis=1)
            out.append((cur, True))
        else:
            Z = cur * st.zfac
            y = st.cell_points
            # same linear flux extrapolation to x = a as twist_d_star
            edge = Z[:, -1] + (st.a - y[-1]) * (Z[:, -1] - Z[:, -2]) / (y[-1] - y[-2])
            Zp = np.concatenate([Z[:, 1:], edge[:, None]], axis=1)
            cur = -(st.xa / st.node_w) * (Zp - Z)
            out.append((cur, False))
    return out


def tower_energy(U: np.ndarray, V: np.ndarray, ops: OperatorCoefficients, m: int,
                 unit_coefficients: bool = False) -> np.ndarray:
    """``e_m`` of stacked levels for one mode (``xi`` units).

    ``e_m = sum_{j+l<=m} lambda^l [||D^(j) v_t||^2 + a^-2 <b D^(j+1) v, .> + lambda <gamma D^(j) v, .>]``
    with ``D = D_xi``.  ``unit_coefficients`` sets ``b = gamma = 1``.
    """
    grid = ops.grid
    st = stagger(grid, ops.alpha)
    a = grid.a
    lam = ops.eigenvalue
    model = ops.model or unit_coefficients
    du = _xi_ordered(U, grid, ops.alpha, m + 1)
    dv = _xi_ordered(V, grid, ops.alpha, m)

    def wnorm(arr, on_cells, coef_name=None):
        w = st.cell_w if on_cells else st.node_w
        c = 1.0
        if coef_name is not None and not model:
            c = ops.cells[coef_name] if on_cells else ops.nodes[coef_name]
        return (c * arr * arr) @ w

    total = np.zeros(U.shape[0])
    for j in range(m + 1):
        # ||D_xi^(j) w||_xi^2 = a^(2j-2) ||D^(j) w||_x^2
        sj = a ** (2 * j - 2)
        part = (sj * wnorm(*dv[j]) + sj * wnorm(*du[j + 1], "A2")
                + lam * sj * wnorm(*du[j], "Ath"))
        total += sum(lam ** l for l in range(m - j + 1)) * part
    return total


def tower_norm_sq(U: np.ndarray, V: np.ndarray, ops: OperatorCoefficients, m: int) -> np.ndarray:
    """Comparison norm for ``e_m``: unit-coefficient ``e_m`` plus ``a^-2 ||v||_xi^2``.

    Every radial derivative carries the patch scaling ``1/a``, as in the
    first-order norm ``H^1_a``.
    """
    grid = ops.grid
    st = stagger(grid, ops.alpha)
    a = grid.a
    base = tower_energy(U, V, ops, m, unit_coefficients=True)
    return base + ((U * U) @ st.node_w) / a ** 4


def energy_tower(traj: Trajectory, k: int, m: int) -> EnergyReport:
    """Time-derivative tower ``E_k`` and spatial tower ``e_m`` along a trajectory.

    Raises
    ------
    InsufficientHistory
        When fewer stored levels exist than the ``k``-th time difference needs.
    """
    if k < 0 or m < 0:
        raise ValueError("tower orders must be non-negative")
    nlev = traj.times.size
    width = 2 * ((k + 1) // 2) - 1 + 4 if k > 0 else 1
    if nlev < width:
        raise InsufficientHistory(f"{nlev} stored levels, {width} needed for order {k}",
                                  levels=nlev, needed=width)
    rep = energy_history(traj)
    Ek = np.zeros(nlev)
    for j in range(k + 1):
        du, dv = _time_derivatives(traj, j)
        for i, ell in enumerate(traj.modes):
            Ek += _energy_parts(du[:, i], dv[:, i], traj.ops[ell])
    em = np.zeros(nlev)
    ref = np.zeros(nlev)
    for i, ell in enumerate(traj.modes):
        em += tower_energy(traj.u[:, i], traj.u_t[:, i], traj.ops[ell], m)
        ref += tower_norm_sq(traj.u[:, i], traj.u_t[:, i], traj.ops[ell], m)
    rep.towers = {f"E_{k}": Ek, f"e_{m}": em, f"norm_{m}": ref}
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ref > 0, em / ref, np.nan)
    rep.notes["sandwich"] = (float(np.nanmin(ratio)) if np.any(ref > 0) else 0.0,
                             float(np.nanmax(ratio)) if np.any(ref > 0) else 0.0)
    return rep


# gronwall ----------------------------------------------------------------------
def gronwall_check(report: EnergyReport, p: TwistParams, t_min_fraction: float = 0.1
                   ) -> EstimateReport:
    """Fit ``c`` in ``E^(1/2)(t) <= exp(c a t) (E^(1/2)(0) + int_0^t ||F||)``.

    ``c`` is the smallest non-negative value for which the bound holds at
    every stored time ``t >= t_min_fraction * T``; the bound is then checked
    at every stored time and the smallest relative margin is reported.
    """
    t = report.times
    a = report.a
    root = np.sqrt(np.maximum(report.E, 0.0))
    integral = report.source_integral if report.source_integral is not None else 0.0 * t
    rhs0 = root[0] + integral
    use = (t >= t_min_fraction * t[-1]) & (t > 0) & (rhs0 > 0)
    c = 0.0
    if np.any(use):
        with np.errstate(divide="ignore"):
            rate = np.log(root[use] / rhs0[use]) / (a * t[use])
        c = float(max(0.0, np.max(rate[np.isfinite(rate)], initial=0.0)))
    bound = np.exp(c * a * t) * rhs0
    scale = max(float(np.max(bound)), 1e-300)
    margin = float(np.min(bound - root) / scale)
    holds = margin >= -1e-12
    report.fitted_c = c
    rep = EstimateReport(name="gronwall", ratios=[((a, float(tt)), r) for tt, r in
                                                   zip(t, root / np.maximum(bound, 1e-300))],
                         bound=1.0, a_values=[a], param_names=("a", "t"), passed=bool(holds))
    rep.notes.update({"fitted_c": c, "margin": margin, "c_times_a": c * a})
    return rep


def gronwall_stable(checks: Sequence[EstimateReport], factor: float = 1.5,
                    floor: float = GRONWALL_FLOOR) -> bool:
    """Fitted constants agree within ``factor`` (values below ``floor`` count as zero)."""
    cs = [chk.notes["fitted_c"] for chk in checks]
    big = [c for c in cs if c > floor]
    if not big:
        return True
    if len(big) < len(cs):
        return False
    return max(big) <= factor * min(big)


# compatibility -------------------------------------------------------------------
@dataclass
class CompatibilityResult:
    """Time derivatives ``v_j = d^j v(0)`` per mode and their zero-trace flags."""

    fields: list
    zero_trace: list


def trace_estimate(u: GridFunction, alpha: float) -> float:
    """Relative size of ``x^alpha u`` extrapolated to ``x = 0``."""
    x = u.grid.points
    W = x ** alpha * u.plain()
    scale = float(np.max(np.abs(W)))
    if scale == 0.0:
        return 0.0
    w0 = W[0] - x[0] * (W[1] - W[0]) / (x[1] - x[0])
    return abs(w0) / scale


def compatibility(v0, v1, F, m: int, ops, trace_tol: float = 1e-6) -> CompatibilityResult:
    """Compatibility functions ``v_0 .. v_m`` for stationary coefficients.

    ``v_{j+2} = -K v_j + B v_{j+1} + d^j F(0)``.

    Raises
    ------
    DerivativeBudget
        When the source lacks ``m - 2`` time derivatives.
    """
    v0, v1 = _as_mode_list(v0), _as_mode_list(v1)
    modes = [f.mode for f in v0]
    by_mode = _ops_by_mode(ops, modes)
    grid = v0[0].grid
    nint = grid.size - 1
    fields = [v0, v1]
    for j in range(m - 1):
        cur = []
        for i, ell in enumerate(modes):
            op = by_mode[ell]
            s = assemble_system(op)
            out = -s.apply(fields[j][i].plain()[:nint])
            damp = damping_system(op)
            if damp is not None:
                lo, di, up = damp
                vv = fields[j + 1][i].plain()[:nint]
                bv = di * vv
                bv[:-1] += up * vv[1:]
                bv[1:] += lo * vv[:-1]
                out = out + bv
            if F is not None:
                fv = F.values(ell, 0.0, j)
                if fv is not None:
                    out = out + np.asarray(fv)[:nint]
            cur.append(GridFunction(grid, np.append(out, 0.0), mode=ell))
        fields.append(cur)
    alpha = by_mode[modes[0]].alpha
    flags = [all(trace_estimate(f, alpha) < trace_tol for f in level) for level in fields]
    return CompatibilityResult(fields, flags)


# frequencies ------------------------------------------------------------------
def dominant_frequency(times: np.ndarray, signal: np.ndarray) -> tuple:
    """Angular frequency of the largest FFT peak and the bin width ``2 pi / T``."""
    sig = np.asarray(signal, dtype=float) - np.mean(signal)
    n = sig.size
    spec = np.abs(np.fft.rfft(sig * np.hanning(n)))
    freqs = np.fft.rfftfreq(n, d=times[1] - times[0])
    k = int(np.argmax(spec[1:]) + 1)
    # parabolic refinement of the peak
    if 1 <= k < spec.size - 1:
        y0, y1, y2 = np.log(spec[k - 1 : k + 2] + 1e-300)
        shift = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
    else:
        shift = 0.0
    df = freqs[1] - freqs[0]
    return 2.0 * np.pi * (freqs[k] + shift * df), 2.0 * np.pi * df
