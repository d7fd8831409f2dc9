"""Asymptotically AdS metrics and the radial coefficients of the wave operator.

A stationary metric on a patch is stored as truncated power series in ``x``
after the leading singular factor has been removed:

========  =============================================
``tt``    ``x**2 g_tt``                (``-1`` at ``x = 0``)
``xx``    ``x**2 g_xx``                (``1`` at ``x = 0``)
``thth``  ``x**2 g_thth / g_sphere``   (``1`` at ``x = 0``)
``tx``    ``g_tx``
``tth``   ``g_t theta``  (decay check only)
``xth``   ``g_x theta``  (decay check only)
========  =============================================

Writing ``phi = x**p u`` with ``p = (n-1)/2`` and dividing the wave operator
by ``-g^tt x**p`` gives the normal form

    P_g u = -u_tt - A2 D*D u + e1 D u + e0 u - lambda Ath u + Btx u_tx + Bt u_t,

where ``lambda = l (l + n - 3)`` is the mode eigenvalue.  On exact AdS and
near ``x = 0`` one has ``A2, Ath -> 1`` while ``e1, Btx, Bt`` vanish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotAAdS, SeriesOrderTooLow
from .grid import RadialGrid
from .series import PowerSeries
from .twisted import (EstimateReport, GridFunction, TwistParams, decay_slope, stagger)

COMPONENTS = ("tt", "xx", "tx", "thth", "tth", "xth")
# leading part subtracted before the decay fit, and the required exponent
DECAY_RULES = {
    "tt": (-1.0, 2.0),
    "xx": (1.0, 2.0),
    "thth": (1.0, 2.0),
    "tx": (0.0, 1.0),
    "tth": (0.0, 1.0),
    "xth": (0.0, 2.0),
}
DEFAULT_SERIES_ORDER = 6
OPERATOR_SERIES_ORDER = 48


# metrics -----------------------------------------------------------------
@dataclass
class MetricSeries:
    """Stationary metric on a patch as factored power series in ``x``."""

    n: int
    components: dict
    order: int = DEFAULT_SERIES_ORDER
    time_dependent: bool = False

    def __post_init__(self):
        comps = {}
        for name in COMPONENTS:
            raw = self.components.get(name, [0.0])
            coeffs = raw.coeffs if isinstance(raw, PowerSeries) else raw
            comps[name] = PowerSeries(coeffs, self.order)
        unknown = set(self.components) - set(COMPONENTS)
        if unknown:
            raise ValueError(f"unknown metric components: {sorted(unknown)}")
        self.components = comps

    def series(self, name: str, order: int | None = None) -> PowerSeries:
        s = self.components[name]
        return s if order is None else s.truncate(order)

    def perturbed(self, name: str, power: int, amount: float) -> "MetricSeries":
        """Copy with ``amount * x**power`` added to the raw component ``name``.

        Factored components absorb the ``x**2`` prefactor automatically.
        """
        shift = power + (2 if name in ("tt", "xx", "thth") else 0)
        order = max(self.order, shift)
        comps = {k: v.truncate(order) for k, v in self.components.items()}
        comps[name] = comps[name] + PowerSeries.monomial(shift, order, amount)
        return MetricSeries(self.n, comps, order)

    def to_table(self) -> dict:
        return {k: v.coeffs.tolist() for k, v in self.components.items()}


def ads_metric(n: int, K: int = DEFAULT_SERIES_ORDER) -> MetricSeries:
    """Exact AdS in the ``x`` coordinate, truncated at order ``K``."""
    if n < 3:
        raise ValueError("n must be at least 3")
    if K < 2:
        raise SeriesOrderTooLow(f"series order {K} is below 2", order=K)
    comps = {
        "tt": [-1.0, 0.0, -2.0, 0.0, -1.0],
        "xx": [1.0],
        "thth": [1.0, 0.0, -2.0, 0.0, 1.0],
    }
    return MetricSeries(n, comps, K)


def coordinate_map(r):
    """``x = (2 cosh(r/2) - 1)**(-1/2)`` for ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0) or np.any(~np.isfinite(r) & ~np.isposinf(r)):
        raise DomainError("the radial coordinate must be non-negative", r=r.tolist())
    with np.errstate(over="ignore"):
        out = 1.0 / np.sqrt(2.0 * np.cosh(0.5 * r) - 1.0)
    return out if out.ndim else float(out)


def inverse_coordinate_map(x):
    """Inverse of :func:`coordinate_map` on ``(0, 1]``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or np.any(x > 1.0):
        raise DomainError("x must lie in (0, 1]", x=x.tolist())
    out = 2.0 * np.arccosh(0.5 * (x ** -2.0 + 1.0))
    return out if out.ndim else float(out)


def phi_u_transform(field: GridFunction, direction: str, p: TwistParams) -> GridFunction:
    """Multiply (``u_to_phi``) or divide (``phi_to_u``) by ``x**((n-1)/2)``."""
    power = 0.5 * (p.n - 1)
    x = field.points
    vals = field.plain()
    if direction == "phi_to_u":
        out = vals * x ** -power
    elif direction == "u_to_phi":
        out = vals * x ** power
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return GridFunction(field.grid, out, mode=field.mode, staggered=field.staggered,
                        alpha=field.alpha)


def aads_decay_check(metric: MetricSeries, grid: RadialGrid,
                     window: tuple | None = None, tolerance: float = 0.1) -> EstimateReport:
    """Fit the decay of each metric remainder and compare with the required order.

    The remainders are taken relative to the leading singular factor
    (see the module docstring) so that exact AdS passes; an identically
    vanishing remainder passes trivially.
    """
    if window is None:
        window = (grid.points[0], 0.05 * grid.a)
    rep = EstimateReport(name="aads_decay", param_names=("component", "required"))
    ok = True
    x = grid.points
    failures = []
    for name in COMPONENTS:
        lead, need = DECAY_RULES[name]
        rem = metric.components[name] - lead
        vals = rem(x)
        if np.all(np.abs(rem.coeffs) == 0.0):
            slope = float("inf")
        else:
            slope = decay_slope(vals, window, points=x)
        rep.ratios.append(((name, need), slope))
        if slope < need - tolerance:
            ok = False
            failures.append(name)
    rep.passed = ok
    rep.notes["failures"] = failures
    return rep


# operator coefficients ------------------------------------------------------
def _metric_values(metric: MetricSeries, x):
    out = {}
    for name in ("tt", "xx", "tx", "thth"):
        s = metric.components[name]
        out[name] = s(x)
        out[name + "_d"] = s.derivative()(x)
    return out


def coefficient_functions(metric: MetricSeries, n: int, mu: float, alpha: float, x) -> dict:
    """Normal-form coefficients evaluated pointwise at ``x``.

    Every expression is arranged so that no two large terms cancel.
    """
    x = np.asarray(x, dtype=float)
    v = _metric_values(metric, x)
    T, Td = v["tt"], v["tt_d"]
    X, Xd = v["xx"], v["xx_d"]
    B, Bd = v["tx"], v["tx_d"]
    S, Sd = v["thth"], v["thth_d"]
    p = 0.5 * (n - 1)
    x2, x3, x4 = x * x, x ** 3, x ** 4
    det = -(T * X - x4 * B * B)
    det_d = -(Td * X + T * Xd - 4.0 * x3 * B * B - 2.0 * x4 * B * Bd)
    if np.any(det <= 0.0) or np.any(X <= 0.0) or np.any(S <= 0.0) or np.any(T >= 0.0):
        raise NotAAdS("metric is not Lorentzian with the expected signs on the grid")
    rho = np.sqrt(det) * S ** (0.5 * (n - 2))
    log_rho_d = 0.5 * det_d / det + 0.5 * (n - 2) * Sd / S
    log_pi_d = Td / T + log_rho_d - det_d / det
    kappa = -T / X
    tau = X / det
    e1 = kappa * log_pi_d
    # kappa - 1/tau = -x^4 B^2 / X^2 exactly
    e0 = -mu * x2 * B * B / (X * X) + (p - alpha) * kappa * log_pi_d / x
    x2a0 = kappa * (-p * p + p * x * log_pi_d) - mu / tau
    a1 = kappa * (1.0 + x * log_pi_d) / x
    ath = det / (S * X)
    btx = 2.0 * x2 * B / X
    y = rho * B / det
    y_d = (rho / det) * (B * (log_rho_d - det_d / det) + Bd)
    ct = x * ((4.0 - n) * y + x * y_d) / (rho * tau)
    bt = ct + p * btx / x
    return {
        "A2": kappa, "A1": a1, "A0": x2a0 / x2, "Ath": ath, "e1": e1, "e0": e0,
        "Btx": btx, "Bt": bt, "tau": tau, "conformal": x ** (0.5 * (n + 3)) * tau,
    }


def coefficient_series(metric: MetricSeries, n: int, mu: float, order: int = OPERATOR_SERIES_ORDER
                       ) -> dict:
    """Normal-form coefficients as power series (used by the peeling).

    Returns series for ``A2``, ``x A1``, ``x**2 A0``, ``Ath``, ``Btx`` and
    ``x Bt``.
    """
    T = metric.series("tt", order)
    X = metric.series("xx", order)
    B = metric.series("tx", order)
    S = metric.series("thth", order)
    p = 0.5 * (n - 1)
    det = -(T * X - (B * B).x_times(4))
    tau = X / det
    rho = det.sqrt() * S.power(0.5 * (n - 2))
    pi = -(T * rho) / det
    x_log_pi_d = (pi.derivative() / pi).x_times(1)
    kappa = -(T / X)
    xa1 = kappa * (1.0 + x_log_pi_d)
    x2a0 = kappa * (x_log_pi_d * p - p * p) - tau.reciprocal() * mu
    ath = (S * tau).reciprocal()
    btx = (B / X).x_times(2) * 2.0
    y = rho * B / det
    x_ct = (y * (4.0 - n) + y.derivative().x_times(1)).x_times(2) / (rho * tau)
    x_bt = x_ct + btx * p
    return {"A2": kappa, "xA1": xa1, "x2A0": x2a0, "Ath": ath, "Btx": btx, "xBt": x_bt}


@dataclass
class OperatorCoefficients:
    """Per-mode coefficient arrays of the normal-form operator on one grid.

    Node arrays are sampled at the grid nodes, cell arrays (suffix ``_cell``)
    at the staggered cell points of the grid for ``alpha``.
    """

    mode: int
    grid: RadialGrid
    params: TwistParams
    nodes: dict
    cells: dict
    series: dict | None = None
    model: bool = False
    metric: MetricSeries | None = None
    notes: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def eigenvalue(self) -> float:
        return self.params.mode_eigenvalue(self.mode)

    def correction_arrays(self) -> dict:
        """Arrays that vanish on the model operator, keyed by expected decay.

        ``second`` collects second-order coefficient corrections (expected
        ``O(x**2)``) and ``first`` the first-order ones (expected ``O(x)``);
        the zeroth-order term enters multiplied by ``x`` as it acts like
        ``x * (u / x)``.
        """
        nd = self.nodes
        x = self.grid.points
        return {
            "second": {"A2-1": nd["A2"] - 1.0, "Ath-1": nd["Ath"] - 1.0, "Btx": nd["Btx"]},
            "first": {"e1": nd["e1"], "x*e0": x * nd["e0"], "Bt": nd["Bt"]},
        }

    def with_mode(self, ell: int) -> "OperatorCoefficients":
        return OperatorCoefficients(ell, self.grid, self.params, self.nodes, self.cells,
                                    self.series, self.model, self.metric, dict(self.notes))


def model_operator(params: TwistParams, ell: int, grid: RadialGrid) -> OperatorCoefficients:
    """Leading-order operator ``-u_tt - D*D u - lambda u`` (corrections zeroed)."""
    x = grid.points
    y = stagger(grid, params.alpha).cell_points

    def const(pts):
        one, zero = np.ones_like(pts), np.zeros_like(pts)
        return {"A2": one, "A1": 1.0 / pts, "A0": -a * a / pts ** 2, "Ath": one,
                "e1": zero, "e0": zero, "Btx": zero, "Bt": zero, "tau": one,
                "conformal": pts ** (0.5 * (params.n + 3))}

    order = OPERATOR_SERIES_ORDER
    a = params.alpha
    series = {
        "A2": PowerSeries.constant(1.0, order),
        "xA1": PowerSeries.constant(1.0, order),
        "x2A0": PowerSeries.constant(-a * a, order),
        "Ath": PowerSeries.constant(1.0, order),
        "Btx": PowerSeries.constant(0.0, order),
        "xBt": PowerSeries.constant(0.0, order),
    }
    return OperatorCoefficients(ell, grid, params, const(x), const(y), series, model=True)


def assemble_operator(metric: MetricSeries, p: TwistParams, ell: int, grid: RadialGrid,
                      series_order: int = OPERATOR_SERIES_ORDER,
                      check: bool = True) -> OperatorCoefficients:
    """Normal-form coefficients of the wave operator for mode ``ell``.

    Raises
    ------
    SeriesOrderTooLow
        If the metric series order is below 2.
    NotAAdS
        If the metric remainders decay too slowly (see :func:`aads_decay_check`).
    """
    if metric.order < 2:
        raise SeriesOrderTooLow(f"series order {metric.order} is below 2", order=metric.order)
    if metric.n != p.n:
        raise ValueError("metric dimension differs from the parameters")
    if ell < 0:
        raise ValueError("mode index must be non-negative")
    if check:
        rep = aads_decay_check(metric, grid)
        if not rep.pass_:
            raise NotAAdS("metric violates the asymptotically AdS decay orders",
                          components=rep.notes["failures"])
    alpha = p.alpha
    nodes = coefficient_functions(metric, p.n, p.mu, alpha, grid.points)
    cells = coefficient_functions(metric, p.n, p.mu, alpha, stagger(grid, alpha).cell_points)
    series = coefficient_series(metric, p.n, p.mu, series_order)
    return OperatorCoefficients(ell, grid, p, nodes, cells, series, model=False, metric=metric)


def apply_normal_form(ops: OperatorCoefficients, u, u_x, u_xx, u_t=0.0, u_tt=0.0, u_tx=0.0,
                      points=None) -> np.ndarray:
    """Evaluate the normal form on analytic derivative samples at the nodes.

    Used to cross-check assembly against an independent evaluation.
    """
    x = ops.grid.points if points is None else points
    if points is None:
        c = ops.nodes
    else:
        c = coefficient_functions(ops.metric, ops.params.n, ops.params.mu, ops.alpha, x) \
            if ops.metric is not None else None
    lam = ops.eigenvalue
    return (-u_tt + c["A2"] * u_xx + c["A1"] * u_x + c["A0"] * u - lam * c["Ath"] * u
            + c["Btx"] * u_tx + c["Bt"] * u_t)
