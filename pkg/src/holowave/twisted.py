"""Twisted-derivative calculus on the weighted half-line measure ``x dx``.

The twisted derivative ``D u = x**-alpha d/dx (x**alpha u)`` and its formal
adjoint ``D* v = -x**(alpha-1) d/dx (x**(1-alpha) v)`` are discretised on a
staggered arrangement: nodal functions live on the grid nodes ``x_j`` and
``D`` maps them to cell functions located at one interior point ``y_i`` of
each cell ``[x_{i-1}, x_i]`` (with ``x_0 = 0``).

Discretisation
--------------
Nodal values enter through the detwisted variable ``W = x**alpha u`` and
cell values through the flux variable ``Z = x**(1-alpha) v``.  With cell
weights ``omega_i`` (measure of the cell) and node weights ``Omega_j`` (measure
of the dual cell) the operators are

    (D u)_i   = c_i (W_i - W_{i-1}),
    (D* v)_j  = -(x_j**alpha / Omega_j) (Z_{j+1} - Z_j),   Z_i = omega_i c_i v_i,

which satisfy the summation-by-parts identity

    <D u, v>_omega - <u, D* v>_Omega = W_N Z_{N+1} - W_0 Z_1

exactly.  The coefficient ``c_i`` is fixed by requiring ``D x**alpha`` to be
exact, which makes ``D* D x**alpha = 0`` hold to rounding, and the cell
point ``y_i`` is the location where the stencil reproduces ``x**(1-alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import (BelowThreshold, EmptyWindow, GridMismatch, IndexBudget, InsufficientOrder,
                     NegativeOrder, ParameterOrder, SignChange)
from .grid import RadialGrid

MIN_POINTS_PER_ORDER = 8


# parameters --------------------------------------------------------------
def alpha_from_mu(n: int, mu: float) -> float:
    """Mass exponent ``sqrt(((n-1)/2)**2 + mu)``.

    Raises
    ------
    BelowThreshold
        If ``mu`` is at or below ``-((n-1)/2)**2``.
    """
    if n < 3:
        raise ValueError("spacetime dimension must be at least 3")
    disc = 0.25 * (n - 1) ** 2 + mu
    if disc <= 0.0:
        raise BelowThreshold(f"mu={mu} is at or below the threshold {-0.25 * (n - 1) ** 2}",
                             n=n, mu=mu)
    return float(np.sqrt(disc))


@dataclass(frozen=True)
class TwistParams:
    """Global parameters ``(n, mu, a)`` with the derived exponent ``alpha``."""

    n: int
    mu: float
    a: float = 1.0

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError("patch width must be positive")
        alpha_from_mu(self.n, self.mu)

    @property
    def alpha(self) -> float:
        return alpha_from_mu(self.n, self.mu)

    @classmethod
    def from_alpha(cls, n: int, alpha: float, a: float = 1.0) -> "TwistParams":
        return cls(n=n, mu=alpha * alpha - 0.25 * (n - 1) ** 2, a=a)

    def mode_eigenvalue(self, ell: int) -> float:
        """Eigenvalue ``ell (ell + n - 3)`` of minus the sphere Laplacian."""
        return float(ell * (ell + self.n - 3))

    def with_width(self, a: float) -> "TwistParams":
        return replace(self, a=a)


# staggered geometry ------------------------------------------------------
def _pow_diff(lo, hi, p):
    """``hi**p - lo**p`` evaluated without cancellation (``lo`` may be 0)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = np.empty(np.broadcast(lo, hi).shape)
    zero = lo == 0.0
    out[zero] = hi[zero] ** p
    nz = ~zero
    out[nz] = lo[nz] ** p * np.expm1(p * np.log(hi[nz] / lo[nz]))
    return out


class Stagger:
    """Cached staggered quantities for one ``(grid, alpha)`` pair."""

    def __init__(self, grid: RadialGrid, alpha: float):
        x = grid.points
        lo = np.concatenate(([0.0], x[:-1]))
        self.alpha = alpha
        self.x = x
        self.node_w = grid.weights
        self.cell_w = 0.5 * _pow_diff(lo, x, 2.0)
        self.xa = x ** alpha
        self.coef = np.sqrt(2.0 * alpha / (self.cell_w * _pow_diff(lo, x, 2.0 * alpha)))
        self.zfac = self.cell_w * self.coef
        self.cell_points = self._cell_points(lo, x, alpha)
        self.a = float(x[-1])

    def _cell_points(self, lo, hi, alpha):
        # y**(1-alpha) = omega c; the alpha -> 1 branch uses the limiting formula
        y = np.empty_like(hi)
        if abs(alpha - 1.0) < 1e-6:
            inner = lo > 0
            y[~inner] = hi[~inner] * np.exp(-0.5)
            l, h = lo[inner], hi[inner]
            mean_log = (h * h * np.log(h) - l * l * np.log(l)) / (h * h - l * l)
            y[inner] = np.exp(mean_log - 0.5)
        else:
            y = np.exp(np.log(self.zfac) / (1.0 - alpha))
            y[0] = alpha ** (1.0 / (2.0 * (1.0 - alpha))) * hi[0]
        return y


def stagger(grid: RadialGrid, alpha: float) -> Stagger:
    key = ("stagger", float(alpha))
    st = grid._cache.get(key)
    if st is None:
        st = Stagger(grid, float(alpha))
        grid._cache[key] = st
    return st


# grid functions ----------------------------------------------------------
@dataclass
class GridFunction:
    """Per-mode radial profile on a :class:`RadialGrid`.

    Parameters
    ----------
    grid : RadialGrid
    values : ndarray
        Nodal values (``u`` or, when ``detwisted``, ``x**alpha u``) or cell
        values at the staggered points when ``staggered`` is set.
    mode : int
        Spherical mode index ``ell``.
    detwisted : bool
        Values hold ``x**alpha u``.  Requires ``alpha``.
    staggered : bool
        Values sit at the cell points of the stagger for ``alpha``.
    trace : float
        Limit of ``x**alpha u`` at ``x = 0`` for nodal functions.
    edge : float or None
        Value at ``x = a`` for cell functions; ``None`` extrapolates.
    alpha : float or None
        Exponent the representation refers to.
    """

    grid: RadialGrid
    values: np.ndarray
    mode: int = 0
    detwisted: bool = False
    staggered: bool = False
    trace: float = 0.0
    edge: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise GridMismatch("values do not match the grid size",
                               expected=self.grid.size, got=self.values.shape)
        if (self.detwisted or self.staggered) and self.alpha is None:
            raise ValueError("detwisted or staggered functions must record alpha")
        if self.detwisted and self.staggered:
            raise ValueError("cell functions are never detwisted")

    @classmethod
    def from_callable(cls, grid: RadialGrid, func: Callable, mode: int = 0,
                      staggered: bool = False, alpha: float | None = None,
                      trace: float = 0.0) -> "GridFunction":
        pts = stagger(grid, alpha).cell_points if staggered else grid.points
        edge = float(func(np.array([grid.a]))[0]) if staggered else None
        return cls(grid, func(pts), mode=mode, staggered=staggered, alpha=alpha,
                   trace=trace, edge=edge)

    @property
    def points(self) -> np.ndarray:
        if self.staggered:
            return stagger(self.grid, self.alpha).cell_points
        return self.grid.points

    def plain(self) -> np.ndarray:
        """Values of ``u`` itself (undoes the detwisting)."""
        if self.detwisted:
            return self.values / stagger(self.grid, self.alpha).xa
        return self.values

    def detwisted_values(self, alpha: float) -> np.ndarray:
        if self.staggered:
            raise ValueError("cell functions have no detwisted form")
        if self.detwisted:
            if self.alpha != alpha:
                raise ValueError("representation refers to a different alpha")
            return self.values
        return self.values * stagger(self.grid, alpha).xa

    def copy_with(self, values, **changes) -> "GridFunction":
        return replace(self, values=np.asarray(values, dtype=float), **changes)

    def scaled(self, factor: float) -> "GridFunction":
        edge = None if self.edge is None else self.edge * factor
        return replace(self, values=self.values * factor, trace=self.trace * factor, edge=edge)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_compatible(self, other)
        edge = None if (self.edge is None or other.edge is None) else self.edge + other.edge
        return replace(self, values=self.values + other.values,
                       trace=self.trace + other.trace, edge=edge)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self + other.scaled(-1.0)


def _check_compatible(u: GridFunction, v: GridFunction) -> None:
    u.grid.check_same(v.grid)
    if u.staggered != v.staggered or u.detwisted != v.detwisted:
        raise GridMismatch("functions use different representations")
    if (u.staggered or u.detwisted) and u.alpha != v.alpha:
        raise GridMismatch("functions refer to different alpha")


def as_node(grid: RadialGrid, values, mode: int = 0, trace: float = 0.0) -> GridFunction:
    return GridFunction(grid, np.asarray(values, dtype=float), mode=mode, trace=trace)


# operators ---------------------------------------------------------------
def _alpha(p) -> float:
    return float(p.alpha if isinstance(p, TwistParams) else p)


def twist_d(u: GridFunction, p) -> GridFunction:
    """Twisted derivative ``D u`` (nodes to cells)."""
    alpha = _alpha(p)
    if u.staggered:
        raise GridMismatch("twist_d acts on nodal functions")
    st = stagger(u.grid, alpha)
    w = u.detwisted_values(alpha)
    du = st.coef * np.diff(w, prepend=u.trace)
    return GridFunction(u.grid, du, mode=u.mode, staggered=True, alpha=alpha, edge=None)


def _flux_edge(st: Stagger, v: GridFunction, z: np.ndarray) -> float:
    if v.edge is not None:
        return st.a ** (1.0 - st.alpha) * v.edge
    y = st.cell_points
    return z[-1] + (st.a - y[-1]) * (z[-1] - z[-2]) / (y[-1] - y[-2])


def twist_d_star(v: GridFunction, p) -> GridFunction:
    """Adjoint twisted derivative ``D* v`` (cells to nodes)."""
    alpha = _alpha(p)
    if not v.staggered:
        raise GridMismatch("twist_d_star acts on cell functions")
    if v.alpha != alpha:
        raise GridMismatch("cell function was staggered for a different alpha")
    st = stagger(v.grid, alpha)
    z = st.zfac * v.values
    z_full = np.append(z, _flux_edge(st, v, z))
    out = -(st.xa / st.node_w) * np.diff(z_full)
    return GridFunction(v.grid, out, mode=v.mode)


def op_A(phi: GridFunction, p) -> GridFunction:
    """Right inverse of ``D``: ``x**-alpha * int_0^x y**alpha phi dy``.

    Accepts a cell function (exact right inverse) or a nodal function, which
    is first moved to the cell points by linear interpolation in ``x``.
    The result is returned in detwisted storage with zero trace.
    """
    alpha = _alpha(p)
    st = stagger(phi.grid, alpha)
    vals = phi.values if phi.staggered else _node_to_cell(st, phi.values)
    w = np.cumsum(vals / st.coef)
    return GridFunction(phi.grid, w, mode=phi.mode, detwisted=True, alpha=alpha, trace=0.0)


def op_A_star(phi: GridFunction, p) -> GridFunction:
    """Right inverse of ``D*``: ``x**(alpha-1) * int_x^a y**(1-alpha) phi dy``.

    Acts on nodal functions and returns a cell function vanishing at ``a``.
    """
    alpha = _alpha(p)
    if phi.staggered:
        raise GridMismatch("op_A_star acts on nodal functions")
    st = stagger(phi.grid, alpha)
    terms = st.node_w * phi.values / st.xa
    z = np.cumsum(terms[::-1])[::-1]
    return GridFunction(phi.grid, z / st.zfac, mode=phi.mode, staggered=True,
                        alpha=alpha, edge=0.0)


def _node_to_cell(st: Stagger, values: np.ndarray) -> np.ndarray:
    x = st.x
    y = st.cell_points
    out = np.empty_like(values)
    out[1:] = values[:-1] + (y[1:] - x[:-1]) * (values[1:] - values[:-1]) / np.diff(x)
    # first cell: extrapolate from the first two nodes
    out[0] = values[0] + (y[0] - x[0]) * (values[1] - values[0]) / (x[1] - x[0])
    return out


def cell_to_node(v: GridFunction) -> GridFunction:
    """Linear interpolation of a cell function onto the nodes."""
    st = stagger(v.grid, v.alpha)
    y = st.cell_points
    x = st.x
    vals = v.values
    out = np.empty_like(vals)
    out[:-1] = vals[:-1] + (x[:-1] - y[:-1]) * (vals[1:] - vals[:-1]) / np.diff(y)
    if v.edge is not None:
        out[-1] = v.edge
    else:
        out[-1] = vals[-1] + (x[-1] - y[-1]) * (vals[-1] - vals[-2]) / (y[-1] - y[-2])
    return GridFunction(v.grid, out, mode=v.mode)


def ordered_twist(m: int, u: GridFunction, p) -> GridFunction:
    """Ordered twisted derivative: ``(D*D)^(m/2) u`` or ``D (D*D)^((m-1)/2) u``."""
    if m < 0:
        raise NegativeOrder(f"order {m} is negative", m=m)
    out = u
    for k in range(m):
        if k % 2 == 0:
            out = twist_d(out, p)
        else:
            out = twist_d_star(out, p)
    return out


def dstar_d_matrix(grid: RadialGrid, alpha: float, interior: int | None = None):
    """Tridiagonal coefficients of ``D* D`` on nodal ``u`` with zero trace.

    Returns ``(lower, diag, upper)`` acting on the first ``interior`` nodes
    (default ``N - 1``); the nodes beyond the block are held at zero, which
    encodes the Dirichlet condition at ``a``.
    """
    st = stagger(grid, alpha)
    nint = grid.size - 1 if interior is None else interior
    if nint > grid.size - 1:
        raise ValueError("the last node is the Dirichlet node")
    kappa = st.cell_w * st.coef ** 2
    xa, w = st.xa[:nint], st.node_w[:nint]
    left, right = kappa[:nint], kappa[1 : nint + 1]
    diag = xa * xa * (left + right) / w
    upper = -(xa[:-1] / w[:-1]) * right[:-1] * st.xa[1:nint]
    lower = -(xa[1:] / w[1:]) * left[1:] * st.xa[: nint - 1]
    return lower, diag, upper


# inner products and norms --------------------------------------------------
def inner(u: GridFunction, v: GridFunction) -> float:
    """Discrete inner product in the staggered weights (cells or nodes)."""
    _check_compatible(u, v)
    if u.staggered:
        st = stagger(u.grid, u.alpha)
        return float(np.sum(st.cell_w * u.values * v.values))
    return float(np.sum(u.grid.weights * u.plain() * v.plain()))


def l2_norm_single(u: GridFunction) -> float:
    """``L^2(x dx)`` norm of one radial profile."""
    if u.staggered:
        st = stagger(u.grid, u.alpha)
        return float(np.sqrt(np.sum(st.cell_w * u.values ** 2)))
    return float(np.sqrt(max(u.grid.integrate(u.plain() ** 2), 0.0)))


def _as_modes(field) -> list:
    if isinstance(field, GridFunction):
        return [field]
    return list(field)


def _check_resolution(grid: RadialGrid, m: int) -> None:
    need = MIN_POINTS_PER_ORDER * (m + 1)
    if grid.size < need:
        raise InsufficientOrder(f"{grid.size} points cannot support order {m}",
                                points=grid.size, required=need)


def ordered_norms(u: GridFunction, m: int, p) -> list:
    """``[||D^(j) u|| for j = 0..m]`` for one mode."""
    out = []
    cur = u
    for j in range(m + 1):
        if j > 0:
            cur = twist_d(cur, p) if j % 2 == 1 else twist_d_star(cur, p)
        out.append(l2_norm_single(cur))
    return out


def weighted_norm(u, kind: str, m: int, p: TwistParams) -> float:
    """``L2``, ``Hm`` or ``Hm_a`` norm of a multi-mode field.

    Parameters
    ----------
    u : GridFunction or sequence of GridFunction
        One radial profile per spherical mode (orthonormal sphere basis).
    kind : {'L2', 'Hm', 'Hm_a', 'Hm_1'}
        ``Hm`` is the recursive twisted Sobolev norm; ``Hm_a`` measures in
        the rescaled variable ``xi = x / a``; ``Hm_1`` is ``Hm_a`` with the
        explicit powers of ``a`` replaced by one.
    m : int
        Order.
    """
    if m < 0:
        raise NegativeOrder(f"order {m} is negative", m=m)
    modes = _as_modes(u)
    if not modes:
        return 0.0
    if kind == "L2":
        return float(np.sqrt(sum(l2_norm_single(f) ** 2 for f in modes)))
    _check_resolution(modes[0].grid, m)
    if kind == "Hm":
        total = 0.0
        for f in modes:
            lam = p.mode_eigenvalue(f.mode)
            norms = ordered_norms(f, m, p)
            total += sum((1.0 + lam) ** (m - j) * norms[j] ** 2 for j in range(m + 1))
        return float(np.sqrt(total))
    if kind in ("Hm_a", "Hm_1"):
        return _scaled_norm(modes, m, p, kind == "Hm_a")
    raise ValueError(f"unknown norm kind {kind!r}")


def _scaled_norm(modes, m: int, p: TwistParams, use_a: bool) -> float:
    """Rescaled norm with all pieces measured in ``xi = x / a``."""
    a = modes[0].grid.a
    weight = a if use_a else 1.0
    # ||w||_xi = ||w||_x / a and D_xi = a D_x, so order-j pieces scale as a**(j-1)
    per_mode = []
    for f in modes:
        lam = p.mode_eigenvalue(f.mode)
        norms = ordered_norms(f, max(m, 1), p)
        per_mode.append((lam, [nrm * a ** (j - 1) for j, nrm in enumerate(norms)]))

    def collect(ang_power: float, order: int) -> float:
        return float(np.sqrt(sum(lam ** ang_power * nrm[order] ** 2 for lam, nrm in per_mode)))

    total = collect(0.0, 0) / weight
    if m == 0:
        return collect(0.0, 0)
    for l in range(1, m + 1):
        total += collect(l / 2.0, 0) + collect((l - 1) / 2.0, 1) / weight
    for l in range(0, m - 1):
        total += collect(l / 2.0, m - l) / weight ** 2
    return total


# estimate reports ----------------------------------------------------------
@dataclass
class EstimateReport:
    """Scan of LHS/RHS ratios of one inequality.

    ``ratios`` holds ``(params, ratio)`` pairs where ``params`` is a tuple
    whose first entry is the patch width when the scan is over widths.
    """

    name: str
    ratios: list = field(default_factory=list)
    bound: float = float("inf")
    a_values: list = field(default_factory=list)
    param_names: tuple = ("a",)
    passed: bool | None = None
    notes: dict = field(default_factory=dict)

    @property
    def sup_ratio(self) -> float:
        vals = [r for _, r in self.ratios]
        return float(max(vals)) if vals else 0.0

    @property
    def pass_(self) -> bool:
        if self.passed is not None:
            return bool(self.passed)
        return bool(np.isfinite(self.sup_ratio) and self.sup_ratio <= self.bound)

    def sup_by_a(self) -> dict:
        out: dict = {}
        for params, r in self.ratios:
            key = params[0]
            out[key] = max(out.get(key, -np.inf), r)
        return out

    def summary(self) -> dict:
        return {"name": self.name, "sup_ratio": self.sup_ratio, "pass": self.pass_}


def a_stable(sups: dict, tolerance: float = 0.05) -> bool:
    """Per-width sups vary by less than ``tolerance`` and do not grow as ``a`` shrinks."""
    vals = np.array([sups[a] for a in sorted(sups)])
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        return False
    if vals.size == 1:
        return True
    spread = (vals.max() - vals.min()) / max(abs(vals.max()), 1e-300)
    # vals sorted by increasing a: the sup at a/2 may not exceed the sup at a
    nonincreasing = np.all(vals[:-1] <= vals[1:] * (1.0 + tolerance))
    return bool(spread < tolerance and nonincreasing)


# hardy-type inequalities ---------------------------------------------------
HARDY_CHECKS = ("AL2", "ALinf", "AstarL2", "AstarLinf", "L2H1")


def _cell_power(st: Stagger, power: float) -> np.ndarray:
    return st.cell_points ** power


def hardy_ratios(phi_values: np.ndarray, grid: RadialGrid, alpha: float, s: float,
                 r: float) -> dict:
    """LHS/RHS ratios of the Hardy-type bounds for one nodal ``phi``.

    The bounds are the weighted ``L^2`` estimates for ``A`` and ``A*``, their
    ``L^inf`` counterparts and the Poincare bound ``||v|| <= c a ||D v||``
    for ``v = A phi``.  The right-hand sides carry the ``a**(r-s)`` factor
    so that every ratio is invariant under dilation.
    """
    st = stagger(grid, alpha)
    a = grid.a
    x = grid.points
    phi_node = GridFunction(grid, phi_values)
    phi_cell = GridFunction(grid, _node_to_cell(st, phi_values), staggered=True, alpha=alpha)
    out = {}

    # ||x^(r-1) A phi|| <= C a^(r-s) ||x^s phi||
    v = op_A(phi_cell, alpha)
    v_plain = v.plain()
    lhs = np.sqrt(grid.integrate((x ** (r - 1.0) * v_plain) ** 2))
    rhs = a ** (r - s) * np.sqrt(np.sum(st.cell_w * (_cell_power(st, s) * phi_cell.values) ** 2))
    out["AL2"] = lhs / rhs

    # ||A phi||_inf <= C ||phi||, with the sup of the nodal values
    phi_norm_cell = np.sqrt(np.sum(st.cell_w * phi_cell.values ** 2))
    out["ALinf"] = np.max(np.abs(v_plain)) / phi_norm_cell

    # ||x^-s A* phi|| <= C a^(r-s) ||x^(1-r) phi||
    w = op_A_star(phi_node, alpha)
    y = st.cell_points
    lhs = np.sqrt(np.sum(st.cell_w * (y ** (-s) * w.values) ** 2))
    rhs = a ** (r - s) * np.sqrt(grid.integrate((x ** (1.0 - r) * phi_values) ** 2))
    out["AstarL2"] = lhs / rhs

    # |A* phi| <= C ||phi|| times the alpha-dependent weight, interior cells only
    phi_norm = np.sqrt(grid.integrate(phi_values ** 2))
    if alpha > 1.0 + 1e-12:
        weight = np.ones_like(y)
    elif abs(alpha - 1.0) <= 1e-12:
        weight = np.log(a / y)
    else:
        weight = (a / y) ** (1.0 - alpha)
    inner_cells = slice(0, grid.size - 1)
    out["AstarLinf"] = np.max(np.abs(w.values[inner_cells]) / weight[inner_cells]) / phi_norm

    # Poincare on the zero-trace v = A phi: ||v|| <= c a ||D v||
    out["L2H1"] = l2_norm_single(v) / (a * l2_norm_single(twist_d(v, alpha)))
    return out


def hardy_report(family: Sequence[Callable], s: float, r: float, a_list: Sequence[float],
                 p: TwistParams, grid: RadialGrid | None = None, npoints: int = 800,
                 tolerance: float = 0.05) -> dict:
    """Scan the Hardy-type ratios over a family and a list of widths.

    Parameters
    ----------
    family : sequence of callables
        Each member maps the rescaled variable ``xi = x / a`` in ``(0, 1]``
        to values; it is sampled on the grid of every width.
    s, r : float
        Weight exponents, ``s < alpha`` and ``r >= s``.
    a_list : sequence of float
        Widths to scan.
    grid : RadialGrid, optional
        Template grid; rescaled to each width.  Defaults to a graded grid.

    Returns
    -------
    dict
        One :class:`EstimateReport` per check name.  Each passes when its
        per-width sup is finite and :func:`a_stable`.
    """
    alpha = p.alpha
    if s >= alpha or r < s:
        raise ParameterOrder(f"need s < alpha and r >= s (s={s}, r={r}, alpha={alpha})",
                             s=s, r=r, alpha=alpha)
    if not family:
        raise ValueError("hardy_report needs a nonempty family")
    base = grid if grid is not None else RadialGrid.make(npoints, 1.0)
    reports = {name: EstimateReport(name=name, a_values=list(a_list),
                                    param_names=("a", "member"))
               for name in HARDY_CHECKS}
    for a in a_list:
        g = base.with_width(a)
        xi = g.points / a
        for idx, member in enumerate(family):
            ratios = hardy_ratios(np.asarray(member(xi), dtype=float), g, alpha, s, r)
            for name, val in ratios.items():
                reports[name].ratios.append(((a, idx), float(val)))
    for rep in reports.values():
        rep.passed = a_stable(rep.sup_by_a(), tolerance)
        rep.notes["log_weight"] = abs(alpha - 1.0) <= 1e-12
    return reports


# decay exponents -----------------------------------------------------------
def decay_slope(u, window: tuple, points: np.ndarray | None = None) -> float:
    """Least-squares slope of ``log|u|`` against ``log x`` inside ``window``.

    ``u`` is a :class:`GridFunction` (its own points are used) or an array
    together with ``points``.

    Raises
    ------
    EmptyWindow
        Fewer than two grid points fall in the window.
    SignChange
        ``u`` vanishes or changes sign in the window.
    """
    if isinstance(u, GridFunction):
        pts, vals = u.points, u.plain()
    else:
        pts, vals = np.asarray(points, dtype=float), np.asarray(u, dtype=float)
    lo, hi = window
    sel = (pts >= lo) & (pts <= hi)
    if np.count_nonzero(sel) < 2:
        raise EmptyWindow(f"window [{lo:g}, {hi:g}] holds fewer than two points",
                          window=(lo, hi))
    v = vals[sel]
    if np.any(v == 0.0) or np.any(np.sign(v) != np.sign(v[0])):
        raise SignChange("function vanishes or changes sign in the window", window=(lo, hi))
    slope, _ = np.polyfit(np.log(pts[sel]), np.log(np.abs(v)), 1)
    return float(slope)


def decay_slope_log(u, window: tuple, points: np.ndarray | None = None,
                    exponents: np.ndarray | None = None) -> tuple:
    """Fit ``x**s (c0 + c1 log x)`` and return ``(s, c0, c1, rms)``.

    The exponent is scanned on a fine set and the linear coefficients are
    obtained by least squares for each candidate; the best relative fit wins.
    """
    if isinstance(u, GridFunction):
        pts, vals = u.points, u.plain()
    else:
        pts, vals = np.asarray(points, dtype=float), np.asarray(u, dtype=float)
    lo, hi = window
    sel = (pts >= lo) & (pts <= hi)
    if np.count_nonzero(sel) < 3:
        raise EmptyWindow(f"window [{lo:g}, {hi:g}] holds fewer than three points",
                          window=(lo, hi))
    x, f = pts[sel], vals[sel]
    if exponents is None:
        guess = np.polyfit(np.log(x), np.log(np.abs(f) + 1e-300), 1)[0]
        exponents = np.linspace(guess - 1.5, guess + 1.5, 3001)
    best = None
    scale = np.abs(f) + 1e-300
    for s_try in exponents:
        basis = np.stack([x ** s_try, x ** s_try * np.log(x)], axis=1) / scale[:, None]
        coef, *_ = np.linalg.lstsq(basis, f / scale, rcond=None)
        res = float(np.sqrt(np.mean((basis @ coef - f / scale) ** 2)))
        if best is None or res < best[3]:
            best = (float(s_try), float(coef[0]), float(coef[1]), res)
    return best


# smooth test fields --------------------------------------------------------
def smoothed_field(phi: GridFunction, m: int, p) -> GridFunction:
    """Nodal field ``v`` with ``D^(m) v = phi`` built by alternating ``A`` and ``A*``.

    ``phi`` must be a cell function for odd ``m`` and a nodal one for even
    ``m``.  The result has zero trace and finite ``H^m`` norm whenever
    ``phi`` is square integrable.
    """
    cur = phi
    for j in range(m, 0, -1):
        cur = op_A(cur, p) if j % 2 == 1 else op_A_star(cur, p)
    if cur.detwisted:
        cur = GridFunction(cur.grid, cur.plain(), mode=cur.mode)
    return cur


def random_smooth_field(grid: RadialGrid, p, m: int, rng: np.random.Generator,
                        mode: int = 0, terms: int = 4) -> GridFunction:
    """Random ``H^m`` profile: a random trigonometric ``phi`` smoothed ``m`` times."""
    alpha = _alpha(p)
    st = stagger(grid, alpha)
    staggered = m % 2 == 1
    pts = st.cell_points if staggered else grid.points
    xi = pts / grid.a
    coef = rng.standard_normal(terms)
    phase = rng.uniform(0.0, 2.0 * np.pi, terms)
    vals = sum(c * np.cos(np.pi * (k + 0.5) * xi + ph)
               for k, (c, ph) in enumerate(zip(coef, phase)))
    # phi carries the natural scale a**-m so that v is of unit size
    vals = vals / grid.a ** m
    phi = GridFunction(grid, vals, mode=mode, staggered=staggered,
                       alpha=alpha if staggered else None)
    return smoothed_field(phi, m, p)


# Morrey-type decay exponents and Moser-type product bounds -------------------
def morrey_exponent(alpha: float, m: int, j: int, delta: float = 0.1) -> float:
    """Decay exponent of ``D_theta^i D^(j) v`` claimed for ``v`` in ``H^m``."""
    if alpha > 1.0 + 1e-12:
        return float(min(m - j - 1, alpha))
    if alpha < 1.0 - 1e-12:
        return -alpha if j % 2 == 0 else alpha - 1.0
    return float(min(m - delta - j - 1, alpha))


def morrey_report(fields: Sequence[GridFunction], m: int, p: TwistParams, window: tuple,
                  tolerance: float = 0.1) -> EstimateReport:
    """Decay slopes of ``D_theta^i D^(j) v`` against the claimed exponents.

    Every admissible pair ``i + j <= m - n/2`` is checked on every field.
    The observed slope must be at least the claimed exponent minus
    ``tolerance``.  The report stores ``(field, i, j, required)`` with the
    observed slope.
    """
    alpha = p.alpha
    budget = m - p.n / 2.0
    if budget < 0:
        raise IndexBudget(f"m={m} does not exceed n/2={p.n / 2}", m=m, n=p.n)
    rep = EstimateReport(name="morrey", param_names=("field", "i", "j", "required"))
    ok = True
    failures = []
    for idx, f in enumerate(fields):
        lam = p.mode_eigenvalue(f.mode)
        for j in range(int(np.floor(budget)) + 1):
            dj = ordered_twist(j, f, p)
            for i in range(int(np.floor(budget - j)) + 1):
                if i > 0 and lam == 0.0:
                    continue
                vals = dj.plain() * lam ** (i / 2.0)
                slope = decay_slope(vals, window, points=dj.points)
                need = morrey_exponent(alpha, m, j)
                rep.ratios.append(((idx, i, j, need), slope))
                if slope < need - tolerance:
                    ok = False
                    failures.append((idx, i, j, slope, need))
    rep.passed = ok
    rep.notes["failures"] = failures
    return rep


def moser_eta(alpha: float) -> float:
    """Weight exponent of the product bound: zero above one, ``min(a, 1-a)`` below."""
    if alpha > 1.0:
        return 0.0
    return float(min(alpha, 1.0 - alpha))


def _mode_stack(field, k: int, p) -> tuple:
    modes = _as_modes(field)
    rows, ells = [], []
    for f in modes:
        d = ordered_twist(k, f, p)
        if d.staggered:
            d = cell_to_node(d)
        rows.append(d.plain())
        ells.append(f.mode)
    return np.array(ells), np.array(rows)


def moser_ratio(u1, u2, m: int, indices: tuple, p: TwistParams, basis=None) -> float:
    """``||x^eta D^(k1) D_th^j1 u1 * D^(k2) D_th^j2 u2|| / (||u1||_Hm ||u2||_Hm)``.

    Fields are sequences of zonal modes; products are formed on a polar
    quadrature grid and integrated against ``x dx dtheta``.
    """
    from .angular import ZonalBasis

    k1, j1, k2, j2 = indices
    if k1 + j1 + k2 + j2 > m:
        raise IndexBudget(f"index sum {k1 + j1 + k2 + j2} exceeds m={m}", m=m)
    m1 = _as_modes(u1)
    m2 = _as_modes(u2)
    n1 = weighted_norm(m1, "Hm", m, p)
    n2 = weighted_norm(m2, "Hm", m, p)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    grid = m1[0].grid
    lmax = max(f.mode for f in m1 + m2)
    basis = basis or ZonalBasis(p.n, lmax)

    def angular_values(field, k, j):
        ells, rows = _mode_stack(field, k, p)
        coeffs = np.zeros((lmax + 1, grid.size))
        for l, row in zip(ells, rows):
            coeffs[l] += row
        return basis.angular_derivative(coeffs, j)

    prod = angular_values(m1, k1, j1) * angular_values(m2, k2, j2)
    prod *= (grid.points ** moser_eta(p.alpha))[:, None]
    radial = basis.integrate(prod ** 2)
    return float(np.sqrt(max(grid.integrate(radial), 0.0)) / (n1 * n2))


def moser_report(u1, u2, m: int, indices: tuple, p: TwistParams, bound: float = 10.0,
                 basis=None) -> EstimateReport:
    """Single-pair product bound as an :class:`EstimateReport`."""
    if m <= p.n / 2.0:
        raise IndexBudget(f"m={m} must exceed n/2={p.n / 2}", m=m, n=p.n)
    ratio = moser_ratio(u1, u2, m, indices, p, basis)
    rep = EstimateReport(name="moser", bound=bound, param_names=("k1", "j1", "k2", "j2"))
    rep.ratios.append((tuple(indices), ratio))
    return rep


def moser_scan(pairs: Sequence[tuple], m: int, p: TwistParams, bound: float = 10.0
               ) -> EstimateReport:
    """Product bound over field pairs and every index tuple with sum ``<= m``."""
    from .angular import ZonalBasis

    rep = EstimateReport(name="moser", bound=bound,
                         param_names=("pair", "k1", "j1", "k2", "j2"))
    lmax = max(f.mode for u1, u2 in pairs for f in _as_modes(u1) + _as_modes(u2))
    basis = ZonalBasis(p.n, lmax)
    tuples = [(k1, j1, k2, j2)
              for k1 in range(m + 1) for j1 in range(m + 1)
              for k2 in range(m + 1) for j2 in range(m + 1)
              if k1 + j1 + k2 + j2 <= m]
    for idx, (u1, u2) in enumerate(pairs):
        for t in tuples:
            rep.ratios.append(((idx,) + t, moser_ratio(u1, u2, m, t, p, basis)))
    return rep
