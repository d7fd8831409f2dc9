"""Peeling of the conformal-boundary datum into explicit boundary layers.

Given a datum ``f(t, theta)`` the solution is written as

    u = chi(x) * sum_layers x**(-alpha + r) (log x)**q H_{r,q}(t) + remainder,

where each ``H_{r,q}`` is a finite linear combination of time derivatives
of the datum mode.  Layers are generated one offset at a time: the lowest
power of ``x`` surviving in ``P_g`` applied to the current partial sum is
cancelled with the identity ``D*D x**s = (alpha**2 - s**2) x**(s-2)``.  When
the denominator ``(r + 2)(r + 2 - 2 alpha)`` vanishes a logarithmic layer
is used instead.  The operator is applied exactly on the level of
generalized power series, so no grid is involved until evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DerivativeBudget, ZeroResidual
from .finite_diff import fornberg_weights
from .geometry import OperatorCoefficients, coefficient_functions
from .grid import RadialGrid
from .twisted import EstimateReport, GridFunction, TwistParams, decay_slope, decay_slope_log

RESONANCE_TOL = 1e-9


# time profiles -------------------------------------------------------------
class BumpProfile:
    """Compactly supported ``amplitude * exp(-1 / (1 - s**2))`` with ``s = (t - c) / w``.

    Derivatives of every order are exact: the ``k``-th derivative equals
    ``P_k(s, h) exp(-h)`` with ``h = 1 / (1 - s**2)`` and a polynomial
    ``P_k`` generated by the recursion ``d/ds (s^i h^j e^-h) =
    (i s^(i-1) h^j + 2 j s^(i+1) h^(j+1) - 2 s^(i+1) h^(j+2)) e^-h``.
    """

    def __init__(self, center: float, width: float, amplitude: float = 1.0,
                 max_order: int = 40):
        if width <= 0.0:
            raise ValueError("bump width must be positive")
        self.center = float(center)
        self.width = float(width)
        self.amplitude = float(amplitude)
        self.max_order = int(max_order)
        self._polys = [{(0, 0): 1.0}]

    @property
    def support(self) -> tuple:
        return (self.center - self.width, self.center + self.width)

    def _poly(self, order: int) -> dict:
        while len(self._polys) <= order:
            prev = self._polys[-1]
            nxt: dict = {}
            for (i, j), c in prev.items():
                if i > 0:
                    nxt[(i - 1, j)] = nxt.get((i - 1, j), 0.0) + i * c
                if j > 0:
                    nxt[(i + 1, j + 1)] = nxt.get((i + 1, j + 1), 0.0) + 2.0 * j * c
                nxt[(i + 1, j + 2)] = nxt.get((i + 1, j + 2), 0.0) - 2.0 * c
            self._polys.append(nxt)
        return self._polys[order]

    def derivative(self, t, order: int = 0) -> np.ndarray:
        """``order``-th time derivative at ``t`` (exact zero off the support)."""
        if order > self.max_order:
            raise DerivativeBudget(f"profile supplies {self.max_order} derivatives",
                                   requested=order, available=self.max_order)
        t = np.asarray(t, dtype=float)
        s = (t - self.center) / self.width
        out = np.zeros_like(s)
        inside = np.abs(s) < 1.0
        if np.any(inside):
            si = s[inside]
            h = 1.0 / (1.0 - si * si)
            acc = np.zeros_like(si)
            for (i, j), c in self._poly(order).items():
                acc += c * si ** i * h ** j
            out[inside] = acc * np.exp(-h)
        return out * self.amplitude / self.width ** order

    def __call__(self, t):
        return self.derivative(t, 0)

    def scaled(self, factor: float) -> "BumpProfile":
        return BumpProfile(self.center, self.width, self.amplitude * factor, self.max_order)

    def describe(self) -> dict:
        return {"kind": "bump", "center": self.center, "width": self.width,
                "amplitude": self.amplitude}


class SampledProfile:
    """Uniformly sampled profile; derivatives by high-order finite differences.

    This is the lower-accuracy mode: derivatives use Fornberg weights on a
    stencil of ``order + accuracy`` samples around the evaluation point.
    """

    def __init__(self, t0: float, spacing: float, values, max_order: int = 8,
                 accuracy: int = 8):
        self.t0 = float(t0)
        self.spacing = float(spacing)
        self.values = np.asarray(values, dtype=float)
        self.max_order = int(max_order)
        self.accuracy = int(accuracy)
        self.amplitude = float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def support(self) -> tuple:
        nz = np.nonzero(self.values)[0]
        if nz.size == 0:
            return (self.t0, self.t0)
        return (self.t0 + (nz[0] - 1) * self.spacing, self.t0 + (nz[-1] + 1) * self.spacing)

    def derivative(self, t, order: int = 0) -> np.ndarray:
        if order > self.max_order:
            raise DerivativeBudget(f"profile supplies {self.max_order} derivatives",
                                   requested=order, available=self.max_order)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        width = order + self.accuracy
        nsamp = self.values.size
        out = np.zeros_like(t)
        for k, tk in enumerate(t):
            pos = (tk - self.t0) / self.spacing
            if pos < -1.0 or pos > nsamp:
                continue
            start = int(np.clip(np.floor(pos) - width // 2 + 1, 0, max(nsamp - width, 0)))
            idx = np.arange(start, min(start + width, nsamp))
            vals = self.values[idx]
            if not np.any(vals):
                continue
            w = fornberg_weights(pos, idx.astype(float), order)[order]
            out[k] = np.dot(w, vals) / self.spacing ** order
        return out

    def __call__(self, t):
        return self.derivative(t, 0)

    def scaled(self, factor: float) -> "SampledProfile":
        return SampledProfile(self.t0, self.spacing, self.values * factor, self.max_order,
                              self.accuracy)

    def describe(self) -> dict:
        return {"kind": "sampled", "t0": self.t0, "spacing": self.spacing,
                "samples": int(self.values.size)}


@dataclass
class DatumMode:
    """One zonal mode of the boundary datum."""

    ell: int
    profile: object
    index: int = 0


@dataclass
class BoundaryDatum:
    """Boundary datum as a list of spherical modes with time profiles."""

    modes: list
    compact: bool = True

    def __post_init__(self):
        ells = [m.ell for m in self.modes]
        if len(set(ells)) != len(ells):
            raise ValueError("each spherical mode may appear only once in a datum")

    @property
    def support(self) -> tuple:
        if not self.modes:
            return (0.0, 0.0)
        lo = min(m.profile.support[0] for m in self.modes)
        hi = max(m.profile.support[1] for m in self.modes)
        return (lo, hi)

    @property
    def max_order(self) -> int:
        return min((m.profile.max_order for m in self.modes), default=0)

    def scaled(self, factor: float) -> "BoundaryDatum":
        return BoundaryDatum([DatumMode(m.ell, m.profile.scaled(factor), m.index)
                              for m in self.modes], self.compact)

    def is_zero(self) -> bool:
        return all(getattr(m.profile, "amplitude", 1.0) == 0.0 for m in self.modes)


def bump_datum(ell: int = 0, center: float = 1.5, width: float = 0.5,
               amplitude: float = 1.0) -> BoundaryDatum:
    return BoundaryDatum([DatumMode(ell, BumpProfile(center, width, amplitude))])


# cutoff --------------------------------------------------------------------
class Cutoff:
    """Smooth cutoff equal to 1 on ``[0, a0/2]`` and 0 on ``[a0, inf)``.

    Built from ``psi(s) = exp(-1/s)``: ``chi = psi(1 - s) / (psi(1 - s) + psi(s))``
    with ``s = 2 x / a0 - 1``.  The first two derivatives are exact.
    """

    def __init__(self, a0: float):
        self.a0 = float(a0)

    @staticmethod
    def _psi(s, k):
        # value and first two derivatives of exp(-1/s) for s > 0, else 0
        out = np.zeros_like(s)
        pos = s > 0
        sp = s[pos]
        e = np.exp(-1.0 / sp)
        if k == 0:
            out[pos] = e
        elif k == 1:
            out[pos] = e / sp ** 2
        else:
            out[pos] = e * (1.0 - 2.0 * sp) / sp ** 4
        return out

    def __call__(self, x, order: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = 2.0 * x / self.a0 - 1.0
        ds = 2.0 / self.a0
        p0, p1, p2 = (self._psi(s, k) for k in range(3))
        q0, q1, q2 = (self._psi(1.0 - s, k) for k in range(3))
        den = q0 + p0
        # chi = q(1-s) / (q(1-s) + p(s)); derivatives with respect to s
        num = q0
        num_d = -q1
        num_dd = q2
        den_d = -q1 + p1
        den_dd = q2 + p2
        chi = num / den
        if order == 0:
            return chi
        chi_d = (num_d - chi * den_d) / den
        if order == 1:
            return chi_d * ds
        chi_dd = (num_dd - 2.0 * chi_d * den_d - chi * den_dd) / den
        return chi_dd * ds * ds


# generalized series of layers ------------------------------------------------
@dataclass
class ExpansionLayer:
    """One term ``chi x**(-alpha + offset) (log x)**log_power H(t)``.

    ``coeffs[i]`` multiplies the ``i``-th time derivative of the datum mode.
    """

    mode: int
    j: int
    offset: int
    log_power: int
    coeffs: np.ndarray
    alpha: float
    profile: object = None
    cutoff: Cutoff | None = None

    @property
    def exponent(self) -> float:
        return -self.alpha + self.offset

    @property
    def derivative_order(self) -> int:
        nz = np.nonzero(self.coeffs)[0]
        return int(nz[-1]) if nz.size else 0

    def coeff(self, t, time_derivative: int = 0) -> np.ndarray:
        """``d^k/dt^k H(t)`` on the evolution time grid."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for i, c in enumerate(self.coeffs):
            if c != 0.0:
                out = out + c * self.profile.derivative(t, i + time_derivative)
        return out


def _operator_terms(series: dict, lam: float, kmax: int) -> dict:
    get = lambda name: np.asarray(series[name].coeffs[: kmax + 1])
    return {"a2": get("A2"), "a1": get("xA1"), "a0": get("x2A0"), "ath": get("Ath"),
            "btx": get("Btx"), "bt": get("xBt"), "lam": lam}


def _shift(vec: np.ndarray, k: int) -> np.ndarray:
    """Coefficient vector of the ``k``-th time derivative."""
    out = np.zeros_like(vec)
    if k < vec.size:
        out[k:] = vec[: vec.size - k]
    return out


def apply_series_operator(terms: dict, offset: int, q: int, vec: np.ndarray, alpha: float,
                          max_offset: int, out: dict) -> None:
    """Accumulate ``P_g(x**(-alpha+offset) L**q H)`` into ``out[(offset, logpow)]``.

    ``L = log x`` and ``H`` is represented by the derivative vector ``vec``.
    """
    e = -alpha + offset

    def add(r, p, v):
        if r > max_offset or p < 0 or not np.any(v):
            return
        key = (r, p)
        if key in out:
            out[key] = out[key] + v
        else:
            out[key] = v.copy()

    a2, a1, a0 = terms["a2"], terms["a1"], terms["a0"]
    dvec = _shift(vec, 1)
    for k in range(a2.size):
        r = offset + k - 2
        if r > max_offset:
            break
        c0 = a2[k] * e * (e - 1.0) + a1[k] * e + a0[k]
        c1 = (a2[k] * (2.0 * e - 1.0) + a1[k]) * q
        c2 = a2[k] * q * (q - 1.0)
        if c0:
            add(r, q, c0 * vec)
        if c1:
            add(r, q - 1, c1 * vec)
        if c2:
            add(r, q - 2, c2 * vec)
        if terms["lam"] and terms["ath"][k]:
            add(offset + k, q, -terms["lam"] * terms["ath"][k] * vec)
        r1 = offset + k - 1
        if terms["btx"][k]:
            add(r1, q, terms["btx"][k] * e * dvec)
            if q:
                add(r1, q - 1, terms["btx"][k] * q * dvec)
        if terms["bt"][k]:
            add(r1, q, terms["bt"][k] * dvec)
    add(offset, q, -_shift(vec, 2))


@dataclass
class PeelResult:
    """Layers of one mode together with the generalized-series residual."""

    mode: int
    layers: list
    residual: dict
    alpha: float
    k: int
    max_offset: int
    resonant_steps: list = field(default_factory=list)

    def leading_residual_offset(self, tol: float = 0.0) -> int | None:
        keys = [r for (r, p), v in self.residual.items() if np.max(np.abs(v)) > tol]
        return min(keys) if keys else None


def peel_mode(series: dict, alpha: float, lam: float, k: int, vec_len: int,
              max_offset: int, tol: float = 1e-11) -> tuple:
    """Run the peeling recursion for one mode on derivative-vector level.

    Returns ``(layers, residual, resonant)`` where ``layers`` maps
    ``(offset, log_power)`` to derivative vectors.
    """
    terms = _operator_terms(series, lam, max_offset + 2)
    layers: dict = {}
    residual: dict = {}
    resonant = []
    first = np.zeros(vec_len)
    first[0] = 1.0
    layers[(0, 0)] = first
    apply_series_operator(terms, 0, 0, first, alpha, max_offset, residual)
    target = 2 * k - 2
    while True:
        live = sorted({r for (r, p), v in residual.items() if np.max(np.abs(v)) > tol})
        if not live or live[0] >= target:
            break
        r = live[0]
        logs = sorted(p for (rr, p) in residual if rr == r)
        top = max(logs)
        rvec = {p: residual.get((r, p), np.zeros(vec_len)) for p in range(top + 1)}
        e = -alpha + r + 2
        d = (r + 2.0) * (r + 2.0 - 2.0 * alpha)
        new: dict = {}
        if abs(d) < RESONANCE_TOL:
            resonant.append(r + 2)
            # sum_p [R_p + 2e(p+1) H_{p+1} + (p+2)(p+1) H_{p+2}] L^p = 0
            for p in range(top, -1, -1):
                acc = rvec[p] + (p + 2) * (p + 1) * new.get(p + 2, 0.0)
                new[p + 1] = -acc / (2.0 * e * (p + 1))
        else:
            for p in range(top, -1, -1):
                acc = rvec[p] + 2.0 * e * (p + 1) * new.get(p + 1, 0.0) \
                    + (p + 2) * (p + 1) * new.get(p + 2, 0.0)
                new[p] = -acc / d
        for p, vec in new.items():
            if not np.any(vec):
                continue
            if np.any(vec[vec_len - 2 :]):
                raise DerivativeBudget("derivative vector too short for the requested depth")
            layers[(r + 2, p)] = layers.get((r + 2, p), 0.0) + vec
            apply_series_operator(terms, r + 2, p, vec, alpha, max_offset, residual)
        # the cancelled offset is zero up to rounding
        scale = max(np.max(np.abs(v)) for v in rvec.values())
        for p in range(top + 1):
            left = residual.pop((r, p), None)
            if left is not None and np.max(np.abs(left)) > 1e-8 * max(scale, 1.0):
                raise RuntimeError("peeling step failed to cancel the leading offset")
    return layers, residual, resonant


class PeeledDatum:
    """Peeling of a full datum: per-mode layers and the residual source.

    The residual ``F = P_g(chi * sum layers)`` is separable: for each mode it
    is ``sum_i profiles[i](x) * f^(i)(t)``.
    """

    def __init__(self, datum: BoundaryDatum, k: int, ops_by_mode: dict, params: TwistParams,
                 cutoff: Cutoff, results: list):
        self.datum = datum
        self.k = k
        self.ops = ops_by_mode
        self.params = params
        self.cutoff = cutoff
        self.results = results

    @property
    def layers(self) -> list:
        return [layer for res in self.results for layer in res.layers]

    def mode_profile(self, ell: int):
        for m in self.datum.modes:
            if m.ell == ell:
                return m.profile
        raise KeyError(ell)

    # grid evaluation -------------------------------------------------------
    def radial_layer_profiles(self, grid: RadialGrid, res: PeelResult, derivative: int = 0):
        """Arrays ``[i, x]`` so that the layer sum is ``sum_i arr[i] f^(i)(t)``.

        ``derivative`` selects the ``x``-derivative (0, 1 or 2) of the sum
        without cutoff.
        """
        x = grid.points
        lx = np.log(x)
        vec_len = res.layers[0].coeffs.size if res.layers else 1
        out = np.zeros((vec_len, x.size))
        for layer in res.layers:
            e, q = layer.exponent, layer.log_power
            base = x ** e
            if derivative == 0:
                shape = base * lx ** q
            elif derivative == 1:
                shape = x ** (e - 1.0) * (e * lx ** q + (q * lx ** (q - 1) if q else 0.0))
            else:
                shape = x ** (e - 2.0) * (e * (e - 1.0) * lx ** q
                                          + (q * (2.0 * e - 1.0) * lx ** (q - 1) if q else 0.0)
                                          + (q * (q - 1.0) * lx ** (q - 2) if q > 1 else 0.0))
            out += layer.coeffs[:, None] * shape[None, :]
        return out

    def residual_profiles(self, grid: RadialGrid, res: PeelResult) -> np.ndarray:
        """Arrays ``[i, x]`` of the residual ``P_g(chi U)`` on the grid nodes."""
        x = grid.points
        lx = np.log(x)
        vec_len = res.layers[0].coeffs.size
        chi = self.cutoff(x)
        inner = np.zeros((vec_len, x.size))
        for (r, q), vec in res.residual.items():
            shape = x ** (-res.alpha + r) * lx ** q
            inner += vec[:, None] * shape[None, :]
        out = chi[None, :] * inner
        # commutator of the operator with the cutoff
        c1 = self.cutoff(x, 1)
        c2 = self.cutoff(x, 2)
        band = (c1 != 0.0) | (c2 != 0.0)
        if np.any(band):
            coef = self._coefficients(res.mode, x[band])
            u0 = self.radial_layer_profiles(grid, res, 0)[:, band]
            u1 = self.radial_layer_profiles(grid, res, 1)[:, band]
            comm = coef["A2"] * (2.0 * c1[band] * u1 + c2[band] * u0) + coef["A1"] * c1[band] * u0
            # Btx chi' U_t: U_t shifts the derivative vector by one
            ut = np.zeros_like(u0)
            ut[1:] = u0[:-1]
            comm = comm + coef["Btx"] * c1[band] * ut
            out[:, band] += comm
        return out

    def _coefficients(self, ell, pts):
        ops = self.ops[ell]
        if ops.model:
            a = self.params.alpha
            one = np.ones_like(pts)
            return {"A2": one, "A1": 1.0 / pts, "Btx": 0.0 * one}
        return coefficient_functions(ops.metric, self.params.n, self.params.mu,
                                     self.params.alpha, pts)

    def derivative_table(self, res: PeelResult, times) -> np.ndarray:
        """``f^(i)(t)`` for ``i < vec_len`` at the requested times."""
        prof = self.mode_profile(res.mode)
        vec_len = res.layers[0].coeffs.size
        times = np.asarray(times, dtype=float)
        return np.stack([prof.derivative(times, i) for i in range(vec_len)])

    def layer_values(self, grid: RadialGrid, t: float) -> list:
        return layer_eval(self, grid, t)

    def residual_values(self, grid: RadialGrid, t: float) -> list:
        out = []
        for res in self.results:
            prof = self.residual_profiles(grid, res)
            d = self.derivative_table(res, [t])[:, 0]
            out.append(GridFunction(grid, d @ prof, mode=res.mode))
        return out


def peel(f: BoundaryDatum, k: int, ops, p: TwistParams, a0_factor: float = 0.5,
         max_offset: int | None = None) -> PeeledDatum:
    """Peel the datum to depth ``k``.

    Parameters
    ----------
    f : BoundaryDatum
    k : int
        Depth; the residual is of order ``x**(-alpha + 2k - 2)``.
    ops : OperatorCoefficients or dict
        Operator per mode (a single object is reused for every mode).
    p : TwistParams
    a0_factor : float
        Cutoff radius as a fraction of the patch width.

    Raises
    ------
    DerivativeBudget
        When a datum profile cannot supply the ``2k`` time derivatives needed.
    """
    if k < 1:
        raise ValueError("peeling depth must be at least 1")
    if isinstance(ops, OperatorCoefficients):
        ops_by_mode = {m.ell: ops.with_mode(m.ell) for m in f.modes}
    else:
        ops_by_mode = dict(ops)
    need = 2 * k
    for m in f.modes:
        if m.profile.max_order < need:
            raise DerivativeBudget(f"datum mode {m.ell} supplies {m.profile.max_order} "
                                   f"derivatives, {need} needed", requested=need,
                                   available=m.profile.max_order)
    any_ops = next(iter(ops_by_mode.values())) if ops_by_mode else None
    a = any_ops.grid.a if any_ops is not None else p.a
    cutoff = Cutoff(a0_factor * a)
    results = []
    vec_len = 2 * k + 3
    for m in f.modes:
        ops_m = ops_by_mode[m.ell]
        series = ops_m.series
        top = max_offset if max_offset is not None else series["A2"].order - 2
        lam = p.mode_eigenvalue(m.ell)
        if getattr(m.profile, "amplitude", 1.0) == 0.0:
            results.append(PeelResult(m.ell, [], {}, p.alpha, k, top))
            continue
        raw_layers, residual, resonant = peel_mode(series, p.alpha, lam, k, vec_len, top)
        layers = []
        for j, ((offset, q), vec) in enumerate(sorted(raw_layers.items())):
            layers.append(ExpansionLayer(m.ell, j, offset, q, np.asarray(vec, dtype=float),
                                         p.alpha, m.profile, cutoff))
        results.append(PeelResult(m.ell, layers, residual, p.alpha, k, top, resonant))
    return PeeledDatum(f, k, ops_by_mode, p, cutoff, results)


def layer_eval(peeled: PeeledDatum, grid: RadialGrid, t: float) -> list:
    """Sum of the cutoff layers per mode at time ``t``."""
    chi = peeled.cutoff(grid.points)
    out = []
    for res in peeled.results:
        if not res.layers:
            out.append(GridFunction(grid, np.zeros(grid.size), mode=res.mode))
            continue
        prof = peeled.radial_layer_profiles(grid, res)
        d = peeled.derivative_table(res, [t])[:, 0]
        out.append(GridFunction(grid, chi * (d @ prof), mode=res.mode))
    return out


def residual_slope(peeled: PeeledDatum, k: int, p: TwistParams, window: tuple, t: float,
                   grid: RadialGrid, log_fit: bool | None = None) -> EstimateReport:
    """Decay exponent of the residual at time ``t`` against ``-alpha + 2k - 2``.

    Raises
    ------
    ZeroResidual
        When the residual vanishes on the window (vacuous pass).
    """
    need = -p.alpha + 2 * k - 2
    rep = EstimateReport(name="residual_slope", param_names=("mode", "required"))
    ok = True
    for gf in peeled.residual_values(grid, t):
        vals = gf.values
        sel = (grid.points >= window[0]) & (grid.points <= window[1])
        if not np.any(vals[sel]):
            raise ZeroResidual("residual vanishes on the window", mode=gf.mode)
        res = next(r for r in peeled.results if r.mode == gf.mode)
        has_log = any(q > 0 for (_, q) in res.residual)
        use_log = has_log if log_fit is None else log_fit
        if use_log:
            slope = decay_slope_log(vals, window, points=grid.points)[0]
        else:
            slope = decay_slope(vals, window, points=grid.points)
        rep.ratios.append(((gf.mode, need), slope))
        rep.notes.setdefault("log_fit", []).append(bool(use_log))
        ok = ok and slope >= need - 0.1
    rep.passed = ok
    return rep
