"""Holographic initial-boundary value problem on one patch.

The field is split as ``phi = chi * sum_j psi_j + psi_k``: the cutoff layers
come from :func:`holowave.boundary.peel` and the remainder ``psi_k`` solves the
homogeneous-boundary problem with the peeling residual as source.  The
quadratic problem ``P_g phi = Q(phi, phi)`` is solved by Picard iteration on
the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .angular import ZonalBasis
from .boundary import BoundaryDatum, PeeledDatum, peel
from .elliptic import node_derivative_matrix
from .errors import (DepthTooShallow, ExponentTooSmall, MaxIterExceeded, NaNDetected,
                     NoContraction)
from .evolution import SampledSource, SeparableSource, Trajectory, evolve
from .geometry import MetricSeries, OperatorCoefficients, assemble_operator, model_operator
from .grid import RadialGrid
from .io import write_csv, write_json
from .series import PowerSeries
from .twisted import EstimateReport, GridFunction, TwistParams, moser_eta, weighted_norm

EVOLUTION_X_MIN_FACTOR = 5e-3


def evolution_grid(npoints: int, a: float, x_min_factor: float = EVOLUTION_X_MIN_FACTOR,
                   ratio: float = 1.05) -> RadialGrid:
    """Graded grid whose innermost node keeps the explicit time step moderate."""
    return RadialGrid.make(npoints, a, "graded", ratio, x_min_factor)


# nonlinearity --------------------------------------------------------------------
@dataclass(frozen=True)
class NonlinearitySpec:
    """Quadratic nonlinearity ``Q`` with exponent ``q`` and coefficient ``gamma_hat(x)``."""

    q: float
    gamma_hat: object = 1.0
    enabled: bool = True

    def gamma_values(self, x: np.ndarray) -> np.ndarray:
        g = self.gamma_hat
        if isinstance(g, PowerSeries) or callable(g):
            return np.asarray(g(x), dtype=float) * np.ones_like(x)
        return float(g) * np.ones_like(x)

    def check(self, p: TwistParams) -> None:
        if self.q < p.alpha + 2.0:
            raise ExponentTooSmall(f"q = {self.q} is below alpha + 2 = {p.alpha + 2.0}",
                                   q=self.q, minimum=p.alpha + 2.0)


def nonlinear_exponent_threshold(p: TwistParams, m: int) -> float:
    """``alpha + m + eta + (5 - n)/2``; the nonlinear theorem needs ``q`` above it."""
    return p.alpha + m + moser_eta(p.alpha) + 0.5 * (5 - p.n)


def check_depth(k: int, m: int, p: TwistParams) -> None:
    if not k > 0.5 * (m + 1 + p.alpha):
        raise DepthTooShallow(f"depth k = {k} must exceed (m + 1 + alpha)/2 = "
                              f"{0.5 * (m + 1 + p.alpha):.4g}", k=k, m=m, alpha=p.alpha)


@dataclass
class FieldJet:
    """Nodal values with ``x`` and ``t`` derivatives, shape ``(..., modes, N)``."""

    modes: list
    value: np.ndarray
    dx: np.ndarray
    dt: np.ndarray


def _inverse_metric(metric: MetricSeries | None, n: int, x: np.ndarray) -> dict:
    if metric is None:
        T, X, B, S = -np.ones_like(x), np.ones_like(x), np.zeros_like(x), np.ones_like(x)
    else:
        T = metric.components["tt"](x)
        X = metric.components["xx"](x)
        B = metric.components["tx"](x)
        S = metric.components["thth"](x)
    x2 = x * x
    det = -(T * X - x2 * x2 * B * B)
    return {"tt": -x2 * X / det, "xx": -x2 * T / det, "tx": x2 * x2 * B / det, "thth": x2 / S}


def eval_Q(u: FieldJet, v: FieldJet, nl: NonlinearitySpec, ops, p: TwistParams,
           basis: ZonalBasis | None = None) -> np.ndarray:
    """Bilinear form ``Q(u, v)`` projected on the modes of ``u``.

    ``Q = gamma_hat x^(q + (n-5)/2) g^{mu nu} d_mu U d_nu V`` with
    ``U = x^((n-1)/2) u`` expanded so that only ``w = u_x + (n-1) u / (2x)``
    and ``u_t`` appear.  Products are formed on a polar quadrature grid.

    Returns
    -------
    ndarray
        Shape ``(..., modes, N)`` matching the inputs.
    """
    if not nl.enabled:
        return np.zeros_like(u.value)
    nl.check(p)
    if u.modes != v.modes:
        raise ValueError("both arguments must carry the same modes")
    op0 = ops if isinstance(ops, OperatorCoefficients) else ops[u.modes[0]]
    grid = op0.grid
    x = grid.points
    n = p.n
    lmax = max(u.modes)
    if basis is None or basis.lmax < lmax or basis.n != n:
        basis = ZonalBasis(n, max(lmax, 0))
    ginv = _inverse_metric(None if op0.model else op0.metric, n, x)
    half = 0.5 * (n - 1)
    Y = basis.values[u.modes]
    dY = basis.dtheta[u.modes]

    def synth(arr, table):
        # (..., modes, N) -> (..., N, theta)
        return np.einsum("...mx,mt->...xt", arr, table)

    wu = u.dx + half * u.value / x
    wv = v.dx + half * v.value / x
    ut, vt = synth(u.dt, Y), synth(v.dt, Y)
    uw, vw = synth(wu, Y), synth(wv, Y)
    uth, vth = synth(u.value, dY), synth(v.value, dY)
    g = {k: val[:, None] for k, val in ginv.items()}
    prod = (g["tt"] * ut * vt + g["tx"] * (ut * vw + uw * vt) + g["xx"] * uw * vw
            + g["thth"] * uth * vth)
    pref = nl.gamma_values(x) * x ** (nl.q + 0.5 * (n - 5))
    q_xt = prod * pref[:, None]
    out = np.einsum("...xt,t,mt->...mx", q_xt, basis.weights, Y)
    return out


# jets of the pieces --------------------------------------------------------------
def _node_dx(values: np.ndarray, grid: RadialGrid, alpha: float) -> np.ndarray:
    """``u_x = D u - alpha u / x`` at the nodes for stacked nodal levels."""
    nint = grid.size - 1
    lo, di, up = node_derivative_matrix(grid, alpha, nint)
    u = values[..., :nint]
    du = di * u
    du[..., :-1] += up * u[..., 1:]
    du[..., 1:] += lo * u[..., :-1]
    out = np.zeros_like(values)
    out[..., :nint] = du - alpha * u / grid.points[:nint]
    return out


def remainder_jet(traj: Trajectory) -> FieldJet:
    alpha = traj.params.alpha
    return FieldJet(list(traj.modes), traj.u, _node_dx(traj.u, traj.grid, alpha), traj.u_t)


def layer_jet(peeled: PeeledDatum, grid: RadialGrid, times: np.ndarray, modes: list) -> FieldJet:
    """Cutoff layer sum with its ``x`` and ``t`` derivatives at the given times."""
    x = grid.points
    chi, chi1 = peeled.cutoff(x), peeled.cutoff(x, 1)
    shape = (times.size, len(modes), x.size)
    val, dx, dt = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    for res in peeled.results:
        if not res.layers:
            continue
        i = modes.index(res.mode)
        p0 = peeled.radial_layer_profiles(grid, res, 0)
        p1 = peeled.radial_layer_profiles(grid, res, 1)
        prof = peeled.mode_profile(res.mode)
        d0 = np.stack([prof.derivative(times, j) for j in range(p0.shape[0])])
        d1 = np.stack([prof.derivative(times, j + 1) for j in range(p0.shape[0])])
        U, Ux, Ut = d0.T @ p0, d0.T @ p1, d1.T @ p0
        val[:, i] = chi * U
        dx[:, i] = chi1 * U + chi * Ux
        dt[:, i] = chi * Ut
    return FieldJet(list(modes), val, dx, dt)


def residual_source(peeled: PeeledDatum, grid: RadialGrid) -> SeparableSource:
    """``F = P_g(chi U)``, the source of the remainder (``u_tt + K u - B u_t = F``)."""
    profiles, vec = {}, {}
    for res in peeled.results:
        if res.layers:
            profiles[res.mode] = peeled.residual_profiles(grid, res)
            vec[res.mode] = profiles[res.mode].shape[0]

    def coefficients(ell, times, order):
        prof = peeled.mode_profile(ell)
        times = np.asarray(times, dtype=float)
        return np.stack([prof.derivative(times, j + order) for j in range(vec[ell])])

    budget = min((m.profile.max_order for m in peeled.datum.modes), default=0)
    top = max(vec.values(), default=1)
    return SeparableSource(profiles, coefficients, max_order=max(budget - top + 1, 0))


class CompositeSource:
    """Sum of several sources."""

    def __init__(self, parts: list):
        self.parts = [s for s in parts if s is not None]
        self.max_order = min((s.max_order for s in self.parts), default=0)

    @property
    def modes(self) -> list:
        return sorted({m for s in self.parts for m in s.modes})

    def chunk(self, ell: int, times: np.ndarray) -> tuple:
        profs, qs = [], []
        for s in self.parts:
            prof, q = s.chunk(ell, times)
            if prof.shape[0]:
                profs.append(prof)
                qs.append(q)
        if not profs:
            return np.zeros((0, 0)), np.zeros((times.size, 0))
        return np.concatenate(profs, axis=0), np.concatenate(qs, axis=1)

    def values(self, ell: int, t: float, order: int = 0):
        out = None
        for s in self.parts:
            v = s.values(ell, t, order)
            if v is not None:
                out = v if out is None else out + v
        return out


# solution container --------------------------------------------------------------
@dataclass
class HoloSolution:
    """Layers plus evolved remainder on the stored time levels."""

    peeled: PeeledDatum | None
    remainder: Trajectory
    k: int
    m: int
    datum: BoundaryDatum
    reports: dict = field(default_factory=dict)
    contraction_log: list = field(default_factory=list)
    nonlinearity: NonlinearitySpec | None = None
    converged: bool = True
    iterations: int = 0
    final_residual: float = 0.0

    @property
    def layers(self) -> list:
        return self.peeled.layers if self.peeled is not None else []

    @property
    def times(self) -> np.ndarray:
        return self.remainder.times

    def layer_field(self) -> np.ndarray:
        """Cutoff layer sum at every stored level, shape ``(levels, modes, N)``."""
        if self.peeled is None:
            return np.zeros_like(self.remainder.u)
        return layer_jet(self.peeled, self.remainder.grid, self.times,
                         self.remainder.modes).value

    def total_field(self) -> np.ndarray:
        return self.layer_field() + self.remainder.u

    def boundary_values(self) -> np.ndarray:
        """``x^alpha u`` extrapolated linearly to ``x = 0`` from the two innermost nodes."""
        x = self.remainder.grid.points
        alpha = self.remainder.params.alpha
        W = self.total_field()[..., :2] * x[:2] ** alpha
        return W[..., 0] - x[0] * (W[..., 1] - W[..., 0]) / (x[1] - x[0])

    def datum_values(self) -> np.ndarray:
        out = np.zeros((self.times.size, len(self.remainder.modes)))
        for dm in self.datum.modes:
            out[:, self.remainder.modes.index(dm.ell)] = dm.profile(self.times)
        return out

    def boundary_error(self) -> float:
        """Largest boundary-value error relative to the datum size."""
        f = self.datum_values()
        scale = float(np.max(np.abs(f)))
        err = float(np.max(np.abs(self.boundary_values() - f)))
        return err / scale if scale > 0 else err

    def remainder_trace(self) -> float:
        """Largest relative extrapolated trace ``x^alpha psi_k`` at ``x = 0``."""
        x = self.remainder.grid.points
        alpha = self.remainder.params.alpha
        W = self.remainder.u * x ** alpha
        scale = float(np.max(np.abs(W)))
        if scale == 0.0:
            return 0.0
        w0 = W[..., 0] - x[0] * (W[..., 1] - W[..., 0]) / (x[1] - x[0])
        return float(np.max(np.abs(w0))) / scale

    def summary(self) -> dict:
        caus = self.reports.get("causality")
        return {
            "k": self.k, "m": self.m,
            "q": self.nonlinearity.q if self.nonlinearity is not None else None,
            "converged": self.converged, "iterations": self.iterations,
            "final_residual": self.final_residual,
            "causality_pass": caus.pass_ if caus is not None else None,
            "boundary_error": self.boundary_error(),
            "remainder_trace": self.remainder_trace(),
        }

    def save(self, directory) -> Path:
        """Write layers, remainder snapshots, contraction log and summary."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for layer in self.layers:
            rows.append([layer.mode, layer.j, layer.offset, layer.log_power, layer.exponent]
                        + list(layer.coeffs))
        width = max((len(layer.coeffs) for layer in self.layers), default=0)
        write_csv(out / "layers.csv", ["mode", "j", "offset", "log_power", "exponent"]
                  + [f"c{i}" for i in range(width)], rows)
        x = self.remainder.grid.points
        snap = []
        for lev, t in enumerate(self.times):
            for i, ell in enumerate(self.remainder.modes):
                for xi, val in zip(x, self.remainder.u[lev, i]):
                    snap.append([t, ell, xi, val])
        write_csv(out / "remainder.csv", ["t", "mode", "x", "u"], snap)
        write_csv(out / "contraction_log.csv", ["iteration", "difference", "ratio"],
                  [[i + 1, d, r] for i, (d, r) in enumerate(self.contraction_log)])
        write_json(out / "summary.json", self.summary())
        return out


# linear problem ------------------------------------------------------------------
def _operators(metric: MetricSeries | None, p: TwistParams, modes: list,
               grid: RadialGrid) -> dict:
    if metric is None:
        return {ell: model_operator(p, ell, grid) for ell in modes}
    return {ell: assemble_operator(metric, p, ell, grid) for ell in modes}


def _zeros(grid: RadialGrid, modes: list) -> list:
    return [GridFunction(grid, np.zeros(grid.size), mode=ell) for ell in modes]


def solve_linear_ibvp(f: BoundaryDatum, k: int, m: int, metric: MetricSeries | None,
                      p: TwistParams, T: float, grid: RadialGrid | None = None,
                      npoints: int = 800, dt: float | None = None, stride: int = 20,
                      a0_factor: float = 0.5, extra_source=None) -> HoloSolution:
    """Solve the linear problem with boundary datum ``f`` on ``[0, T]``.

    Parameters
    ----------
    f : BoundaryDatum
        Datum supported in ``t > 0``.
    k, m : int
        Peeling depth and regularity index; ``k > (m + 1 + alpha)/2``.
    metric : MetricSeries or None
        ``None`` selects the model operator.
    extra_source : optional
        Additional remainder source (used by the nonlinear solver).

    Raises
    ------
    DepthTooShallow
    """
    check_depth(k, m, p)
    if grid is None:
        grid = evolution_grid(npoints, p.a)
    p = p.with_width(grid.a)
    modes = sorted({dm.ell for dm in f.modes}) or [0]
    ops = _operators(metric, p, modes, grid)
    peeled = None
    source = extra_source
    if not f.is_zero():
        peeled = peel(f, k, ops, p, a0_factor)
        source = CompositeSource([residual_source(peeled, grid), extra_source])
    zero = _zeros(grid, modes)
    traj = evolve(zero, zero, source, ops, T, dt=dt, stride=stride)
    sol = HoloSolution(peeled, traj, k, m, f)
    sol.reports["causality"] = causality_check(sol, f.support[0])
    return sol


def causality_check(sol: HoloSolution, t0: float, threshold: float = 1e-10) -> EstimateReport:
    """Sup-norm of the full field before the datum support starts."""
    rep = EstimateReport(name="causality", bound=threshold, param_names=("t",))
    early = sol.times < t0
    if t0 <= 0.0 or not np.any(early):
        rep.passed = True
        rep.notes["vacuous"] = True
        return rep
    total = sol.total_field()[early]
    sup = np.max(np.abs(total), axis=(1, 2))
    rep.ratios = [((float(t),), float(s)) for t, s in zip(sol.times[early], sup)]
    rep.passed = bool(np.max(sup) < threshold)
    rep.notes["vacuous"] = False
    rep.notes["sup"] = float(np.max(sup))
    return rep


# nonlinear problem ---------------------------------------------------------------
def x_norm(traj_u: np.ndarray, traj_ut: np.ndarray, grid: RadialGrid, modes: list, m: int,
           p: TwistParams) -> float:
    """``max_t (||u||_{H^(m+1)} + ||u_t||_{H^m})`` over stored levels."""
    best = 0.0
    for lev in range(traj_u.shape[0]):
        u = [GridFunction(grid, traj_u[lev, i], mode=ell) for i, ell in enumerate(modes)]
        v = [GridFunction(grid, traj_ut[lev, i], mode=ell) for i, ell in enumerate(modes)]
        val = weighted_norm(u, "Hm", m + 1, p) + weighted_norm(v, "Hm", m, p)
        best = max(best, val)
    return best


def nonlinear_source(psi: FieldJet, layers: FieldJet, nl: NonlinearitySpec, ops, p: TwistParams,
                     basis: ZonalBasis, include_layers_square: bool = True) -> np.ndarray:
    """``Q(Psi, Psi) + 2 Q(R, Psi)`` plus ``Q(R, R)`` when requested."""
    out = eval_Q(psi, psi, nl, ops, p, basis) + 2.0 * eval_Q(layers, psi, nl, ops, p, basis)
    if include_layers_square:
        out = out + eval_Q(layers, layers, nl, ops, p, basis)
    return out


def solve_nonlinear_ibvp(f: BoundaryDatum, k: int, m: int, nl: NonlinearitySpec,
                         metric: MetricSeries | None, p: TwistParams, T: float,
                         max_iter: int = 12, tol: float = 1e-8,
                         grid: RadialGrid | None = None, npoints: int = 800,
                         dt: float | None = None, stride: int = 20,
                         a0_factor: float = 0.5) -> tuple:
    """Picard iteration ``Psi_i = S(rho) + S(N(Psi_{i-1}))`` for the quadratic problem.

    The equation is ``P_g phi = Q(phi, phi)``.  With ``phi = R + Psi`` and
    ``R`` the cutoff layers, the remainder obeys
    ``P_g Psi = -P_g R + Q(R, R) + 2 Q(R, Psi) + Q(Psi, Psi)``.

    Returns
    -------
    (HoloSolution, list)
        The solution and the contraction log ``[(difference, ratio), ...]``.

    Raises
    ------
    DepthTooShallow, ExponentTooSmall
        When the depth or exponent conditions fail.
    NoContraction
        When the contraction ratio exceeds one for three consecutive iterations.
    MaxIterExceeded
    """
    check_depth(k, m, p)
    if not nl.enabled:
        sol = solve_linear_ibvp(f, k, m, metric, p, T, grid, npoints, dt, stride, a0_factor)
        sol.nonlinearity = nl
        sol.iterations = 1
        return sol, []
    nl.check(p)
    need = nonlinear_exponent_threshold(p, m)
    if not nl.q > need:
        raise ExponentTooSmall(f"q = {nl.q} must exceed alpha + m + eta + (5-n)/2 = {need:.4g}",
                               q=nl.q, minimum=need)
    if grid is None:
        grid = evolution_grid(npoints, p.a)
    p = p.with_width(grid.a)
    modes = sorted({dm.ell for dm in f.modes}) or [0]
    ops = _operators(metric, p, modes, grid)
    basis = ZonalBasis(p.n, max(modes))
    base = solve_linear_ibvp(f, k, m, metric, p, T, grid, npoints, dt, stride, a0_factor)
    traj = base.remainder
    times = traj.times
    spacing = times[1] - times[0]
    layers = (layer_jet(base.peeled, grid, times, modes) if base.peeled is not None
              else FieldJet(modes, *(np.zeros_like(traj.u),) * 3))
    linear_src = residual_source(base.peeled, grid) if base.peeled is not None else None

    def iterate(psi_traj):
        nsrc = nonlinear_source(remainder_jet(psi_traj), layers, nl, ops, p, basis)
        sampled = SampledSource(0.0, spacing, {ell: -nsrc[:, i] for i, ell in enumerate(modes)})
        zero = _zeros(grid, modes)
        return evolve(zero, zero, CompositeSource([linear_src, sampled]), ops, T,
                      dt=traj.dt, stride=stride)

    def diff_norm(a: Trajectory, b: Trajectory) -> float:
        return x_norm(a.u - b.u, a.u_t - b.u_t, grid, modes, m, p)

    log = []
    # the first iterate includes Q(R, R) on top of the linear remainder
    prev = traj
    prev_diff = None
    above = 0
    converged = False
    current = prev
    for it in range(1, max_iter + 1):
        try:
            current = iterate(prev)
        except NaNDetected as exc:
            raise NoContraction("iteration blew up before contracting",
                                iteration=it, ratios=[r for _, r in log]) from exc
        d = diff_norm(current, prev)
        size = x_norm(current.u, current.u_t, grid, modes, m, p)
        ratio = d / prev_diff if prev_diff not in (None, 0.0) else 0.0
        if not np.isfinite(d):
            ratio = np.inf
        log.append((d, ratio))
        above = above + 1 if ratio > 1.0 else 0
        if above >= 3:
            raise NoContraction("contraction ratio above one for three iterations",
                                iteration=it, ratios=[r for _, r in log])
        prev_diff = d
        prev = current
        if d <= tol * max(size, 1e-300):
            converged = True
            break
    if not converged:
        raise MaxIterExceeded(f"no convergence in {max_iter} iterations",
                              iterations=max_iter, last_difference=log[-1][0])
    # fixed-point residual: one more application of the map
    check = iterate(current)
    size = x_norm(current.u, current.u_t, grid, modes, m, p)
    residual = diff_norm(check, current) / max(size, 1e-300)
    sol = HoloSolution(base.peeled, current, k, m, f, nonlinearity=nl, converged=True,
                       iterations=len(log), final_residual=residual, contraction_log=log)
    sol.reports["causality"] = causality_check(sol, f.support[0])
    sol.reports["contraction"] = EstimateReport(
        name="contraction", ratios=[((i + 1,), r) for i, (_, r) in enumerate(log)],
        bound=1.0, param_names=("iteration",))
    return sol, log


def contraction_threshold(f: BoundaryDatum, k: int, m: int, nl: NonlinearitySpec,
                          metric: MetricSeries | None, p: TwistParams, T: float,
                          amplitudes, **kwargs) -> dict:
    """Smallest amplitude in ``amplitudes`` (ascending) at which Picard stops contracting."""
    record = []
    for amp in amplitudes:
        try:
            solve_nonlinear_ibvp(f.scaled(amp), k, m, nl, metric, p, T, **kwargs)
            record.append((amp, "converged"))
        except NoContraction:
            record.append((amp, "no_contraction"))
            return {"threshold": float(amp), "record": record}
        except MaxIterExceeded:
            record.append((amp, "max_iter"))
    return {"threshold": float("inf"), "record": record}
