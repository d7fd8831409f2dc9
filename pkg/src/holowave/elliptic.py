"""Mode-wise solver for the elliptic part of the wave operator.

The positive operator ``K = -L_g`` acts on nodal values ``u_1..u_{N-1}``
(the last node carries the Dirichlet condition ``u(a) = 0`` and the trace at
``x = 0`` is zero by construction of the twisted stencil).  In the normal
form of :mod:`holowave.geometry`

    K u = A2 D*D u - e1 D u - e0 u + lambda Ath u,

and ``K`` is tridiagonal.  The model part ``D*D + lambda`` is symmetric in
the node-weighted inner product, which the eigen-solver exploits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal, lapack
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.special import jv

from .errors import ConvergenceFailure, NotSmallEnough, SingularSystem
from .geometry import MetricSeries, OperatorCoefficients, assemble_operator, model_operator
from .grid import RadialGrid
from .twisted import (EstimateReport, GridFunction, TwistParams, a_stable, dstar_d_matrix,
                      stagger, weighted_norm)

SMALLNESS_BOUND = 4.0
DENSE_EIGEN_LIMIT = 2000


# discrete operators ----------------------------------------------------------
def node_derivative_matrix(grid: RadialGrid, alpha: float, interior: int):
    """Tridiagonal ``(lower, diag, upper)`` of ``D u`` averaged onto the nodes.

    The cell values on both sides of a node are interpolated linearly in
    ``x``; the zero-trace and Dirichlet conditions are built in.
    """
    st = stagger(grid, alpha)
    x, y, c, xa = st.x, st.cell_points, st.coef, st.xa
    j = np.arange(interior)
    span = y[j + 1] - y[j]
    wl = (y[j + 1] - x[j]) / span
    wr = (x[j] - y[j]) / span
    # (Du)_j = c_j (xa_j u_j - xa_{j-1} u_{j-1}), (Du)_{j+1} = c_{j+1}(xa_{j+1}u_{j+1} - xa_j u_j)
    diag = wl * c[j] * xa[j] - wr * c[j + 1] * xa[j]
    upper = (wr * c[j + 1] * xa[j + 1])[:-1]
    lower = -(wl * c[j] * xa[np.maximum(j - 1, 0)])[1:]
    return lower, diag, upper


@dataclass
class EllipticSystem:
    """Tridiagonal positive operator for one mode, with Dirichlet data built in."""

    mode: int
    grid: RadialGrid
    alpha: float
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    weights: np.ndarray
    model: bool

    @property
    def size(self) -> int:
        return self.diag.size

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[:-1] += self.upper * u[1:]
        out[1:] += self.lower * u[:-1]
        return out

    def symmetric_part(self) -> tuple:
        """``Omega^(1/2) K Omega^(-1/2)`` diagonals (exactly symmetric for the model)."""
        off = -np.sqrt(np.abs(self.upper * self.lower))
        return self.diag.copy(), off

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)


def assemble_system(ops: OperatorCoefficients, model_only: bool = False) -> EllipticSystem:
    """Tridiagonal ``K = -L_g`` on nodes ``1..N-1`` for the mode of ``ops``."""
    grid = ops.grid
    alpha = ops.alpha
    nint = grid.size - 1
    lam = ops.eigenvalue
    lo, di, up = dstar_d_matrix(grid, alpha, nint)
    if model_only or ops.model:
        di = di + lam
        return EllipticSystem(ops.mode, grid, alpha, lo, di, up, grid.weights[:nint], True)
    c = {k: v[:nint] for k, v in ops.nodes.items()}
    dl, dd, du = node_derivative_matrix(grid, alpha, nint)
    diag = c["A2"] * di - c["e1"] * dd - c["e0"] + lam * c["Ath"]
    upper = c["A2"][:-1] * up - c["e1"][:-1] * du
    lower = c["A2"][1:] * lo - c["e1"][1:] * dl
    return EllipticSystem(ops.mode, grid, alpha, lower, diag, upper, grid.weights[:nint], False)


def correction_size(ops: OperatorCoefficients) -> float:
    """Pointwise size of the non-model coefficients relative to the model ones."""
    if ops.model:
        return 0.0
    nd = ops.nodes
    x = ops.grid.points
    size = (np.abs(nd["A2"] - 1.0) + np.abs(nd["Ath"] - 1.0) + x * np.abs(nd["e1"])
            + x * x * np.abs(nd["e0"]))
    return float(np.max(size))


# solves --------------------------------------------------------------------
def _tridiagonal_solve(system: EllipticSystem, rhs: np.ndarray) -> np.ndarray:
    dl, d, du, du2, ipiv, info = lapack.dgttrf(system.lower, system.diag, system.upper)
    pivots = np.abs(d)
    if info != 0 or not np.all(np.isfinite(pivots)) or np.min(pivots) == 0.0:
        raise SingularSystem("elliptic system is singular",
                             smallest_pivot=float(np.min(pivots)) if pivots.size else 0.0)
    scale = np.max(np.abs(system.diag))
    if np.min(pivots) < 1e-14 * scale:
        raise SingularSystem("elliptic system is numerically singular",
                             smallest_pivot=float(np.min(pivots)))

    def solve(b):
        x, info2 = lapack.dgttrs(dl, d, du, du2, ipiv, b)
        return x

    sol = solve(rhs)
    # iterative refinement with the residual accumulated in extended precision
    for _ in range(3):
        r = _residual_extended(system, sol, rhs)
        if np.max(np.abs(r)) <= 1e-15 * max(np.max(np.abs(rhs)), 1e-300):
            break
        sol = sol + solve(r)
    return sol


def _residual_extended(system: EllipticSystem, u: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    ld = np.longdouble
    uu = u.astype(ld)
    out = system.diag.astype(ld) * uu
    out[:-1] += system.upper.astype(ld) * uu[1:]
    out[1:] += system.lower.astype(ld) * uu[:-1]
    return (rhs.astype(ld) - out).astype(float)


def relative_residual(system: EllipticSystem, w: np.ndarray, rhs: np.ndarray) -> float:
    r = system.apply(w) - rhs
    num = np.sqrt(np.sum(system.weights * r * r))
    den = np.sqrt(np.sum(system.weights * rhs * rhs))
    return float(num / den) if den > 0 else float(num)


def solve_elliptic(F, ops, p: TwistParams, smallness_bound: float = SMALLNESS_BOUND,
                   check_residual: float = 1e-10):
    """Solve ``-L_g w = F`` mode by mode with zero trace and ``w(a) = 0``.

    Parameters
    ----------
    F : GridFunction or sequence of GridFunction
        Right-hand side per mode (nodal values; the last node is ignored).
    ops : OperatorCoefficients or dict
        Operator for each mode; a single object is reused for every mode.
    p : TwistParams

    Returns
    -------
    GridFunction or list of GridFunction
        Matches the shape of ``F``.

    Raises
    ------
    NotSmallEnough
        When the correction coefficients exceed ``smallness_bound``.
    SingularSystem
        When the factorisation meets a vanishing pivot.
    """
    single = isinstance(F, GridFunction)
    modes = [F] if single else list(F)
    out = []
    for f in modes:
        op = _ops_for(ops, f.mode)
        size = correction_size(op)
        if size > smallness_bound:
            raise NotSmallEnough(f"correction size {size:.3g} exceeds {smallness_bound}",
                                 size=size, bound=smallness_bound)
        system = assemble_system(op)
        rhs = f.plain()[:-1]
        if not np.any(rhs):
            w = np.zeros_like(rhs)
        else:
            w = _tridiagonal_solve(system, rhs.copy())
            res = relative_residual(system, w, rhs)
            if res > check_residual:
                raise SingularSystem(f"residual {res:.3g} above {check_residual}",
                                     residual=res)
        out.append(GridFunction(f.grid, np.append(w, 0.0), mode=f.mode))
    return out[0] if single else out


def _ops_for(ops, ell: int) -> OperatorCoefficients:
    if isinstance(ops, OperatorCoefficients):
        return ops if ops.mode == ell else ops.with_mode(ell)
    return ops[ell]


def weak_form_defect(w: GridFunction, F: GridFunction, ops: OperatorCoefficients,
                     tests: np.ndarray) -> float:
    """Largest relative defect of ``<Dw, Dv> + lambda <w, v> - <F, v>`` over test vectors.

    Only meaningful for the model operator.  ``tests`` has shape
    ``(count, N)`` with zero last entries.
    """
    from .twisted import inner, twist_d

    alpha = ops.alpha
    lam = ops.eigenvalue
    dw = twist_d(w, alpha)
    worst = 0.0
    for v in tests:
        gv = GridFunction(w.grid, v, mode=w.mode)
        lhs = inner(dw, twist_d(gv, alpha)) + lam * inner(w, gv)
        rhs = inner(F.copy_with(np.append(F.values[:-1], 0.0)), gv)
        scale = abs(inner(dw, twist_d(gv, alpha))) + abs(lam * inner(w, gv)) + abs(rhs)
        worst = max(worst, abs(lhs - rhs) / max(scale, 1e-300))
    return worst


# eigenmodes ------------------------------------------------------------------
def eigenmodes(ops: OperatorCoefficients, count: int, p: TwistParams,
               dense_limit: int = DENSE_EIGEN_LIMIT) -> list:
    """Lowest ``count`` eigenpairs of the model operator ``D*D + lambda``.

    Eigenfields are orthonormal in the node-weighted inner product and
    normalised to be positive near ``x = 0``.

    Raises
    ------
    ConvergenceFailure
        When the iterative solver (used from ``dense_limit`` nodes up) fails.
    """
    system = assemble_system(ops, model_only=True)
    nint = system.size
    if count > nint:
        raise ValueError("more eigenpairs requested than unknowns")
    d, e = system.symmetric_part()
    if ops.grid.size < dense_limit:
        # bisection with the default tolerance eps * ||K|| loses the small eigenvalues
        # on graded grids; a tiny absolute tolerance keeps full relative accuracy
        vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1),
                                      tol=4.0 * np.finfo(float).tiny)
    else:
        mat = sparse.diags([e, d, e], [-1, 0, 1], format="csc")
        try:
            vals, vecs = eigsh(mat, k=count, sigma=0.0, which="LM", tol=1e-13)
        except ArpackNoConvergence as exc:
            raise ConvergenceFailure("iterative eigensolver did not converge") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    sqrt_w = np.sqrt(system.weights)
    out = []
    for k in range(count):
        u = vecs[:, k] / sqrt_w
        if u[0] < 0:
            u = -u
        out.append((float(vals[k]), GridFunction(ops.grid, np.append(u, 0.0), mode=ops.mode)))
    return out


def bessel_zero(order: float, index: int = 1) -> float:
    """``index``-th positive zero of ``J_order`` by bracketing and root polishing."""
    found = 0
    step = 0.05
    lo = 1e-6
    f_lo = jv(order, lo + 1e-9)
    x = lo
    while True:
        x_next = x + step
        f_next = jv(order, x_next)
        if np.sign(f_next) != np.sign(f_lo) and f_next != 0.0:
            found += 1
            if found == index:
                return float(brentq(lambda z: jv(order, z), x, x_next, xtol=1e-15, rtol=1e-15))
        x, f_lo = x_next, f_next


def exact_model_eigenvalue(alpha: float, a: float, ell: int, n: int, index: int = 1) -> float:
    """Continuum eigenvalue ``(j_{alpha,index} / a)**2 + ell (ell + n - 3)``."""
    return (bessel_zero(alpha, index) / a) ** 2 + ell * (ell + n - 3)


# a-scans -----------------------------------------------------------------------
def _family_member(member):
    if callable(member):
        return 0, member
    return int(member[0]), member[1]


def elliptic_ratio(m: int, family: Sequence, a_list: Sequence[float], metric: MetricSeries | None,
                   p: TwistParams, grid: RadialGrid | None = None, npoints: int = 800,
                   tolerance: float = 0.05) -> EstimateReport:
    """Scan ``||w||_{H^(m+2)_a} / ||F||_{H^m_1}`` over widths and a family of sources.

    Parameters
    ----------
    m : int
        Order of the source norm.
    family : sequence
        Callables of ``xi = x / a`` (mode 0) or ``(ell, callable)`` pairs.
    metric : MetricSeries or None
        ``None`` uses the model operator.

    Returns
    -------
    EstimateReport
        Passes when the per-width sup does not grow by more than
        ``tolerance`` each time ``a`` halves.
    """
    base = grid if grid is not None else RadialGrid.make(npoints, 1.0)
    rep = EstimateReport(name=f"elliptic_m{m}", a_values=list(a_list),
                         param_names=("a", "member"))
    for a in a_list:
        g = base.with_width(a)
        pa = p.with_width(a)
        xi = g.points / a
        for idx, member in enumerate(family):
            ell, func = _family_member(member)
            ops = (model_operator(pa, ell, g) if metric is None
                   else assemble_operator(metric, pa, ell, g))
            vals = np.asarray(func(xi), dtype=float)
            vals[-1] = 0.0
            F = GridFunction(g, vals, mode=ell)
            w = solve_elliptic(F, ops, pa)
            lhs = weighted_norm([w], "Hm_a", m + 2, pa)
            rhs = weighted_norm([F], "Hm_1", m, pa)
            rep.ratios.append(((a, idx), lhs / rhs))
    sups = rep.sup_by_a()
    vals = [sups[a] for a in sorted(sups)]
    rep.passed = bool(np.all(np.isfinite(vals)) and
                      all(vals[i] <= vals[i + 1] * (1.0 + tolerance) for i in range(len(vals) - 1)))
    rep.notes["spread_ok"] = a_stable(sups, tolerance)
    return rep
