import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from holowave.errors import DomainError, NotAAdS, SeriesOrderTooLow
from holowave.geometry import (aads_decay_check, ads_metric, apply_normal_form,
                               assemble_operator, coordinate_map, inverse_coordinate_map,
                               model_operator)
from holowave.grid import RadialGrid
from holowave.twisted import TwistParams

t_s, x_s = sp.symbols("t x", positive=True)


def wave_operator_oracle(metric, p, ell, u_expr):
    """``(box_g - mu)(x^p u Y_l) / (-g^tt x^p)`` built directly from the metric."""
    n = p.n
    poly = {k: sum(sp.Float(c) * x_s ** i for i, c in enumerate(metric.components[k].coeffs))
            for k in ("tt", "xx", "tx", "thth")}
    G = sp.Matrix([[poly["tt"] / x_s ** 2, poly["tx"]], [poly["tx"], poly["xx"] / x_s ** 2]])
    Ginv = G.inv()
    sphere = poly["thth"] / x_s ** 2
    rho = sp.sqrt(-G.det()) * sphere ** sp.Rational(n - 2, 2)
    pw = sp.Rational(n - 1, 2)
    phi = x_s ** pw * u_expr
    coords = (t_s, x_s)
    grad = [sum(Ginv[i, j] * sp.diff(phi, coords[j]) for j in range(2)) for i in range(2)]
    box = sum(sp.diff(rho * grad[i], coords[i]) for i in range(2)) / rho
    box += -p.mode_eigenvalue(ell) * phi / sphere
    return (box - sp.Float(p.mu) * phi) / (-Ginv[0, 0] * x_s ** pw)


@pytest.mark.parametrize("n,alpha,ell", [(4, 1.5, 2), (5, 0.7, 1), (3, 2.2, 0)])
def test_normal_form_matches_direct_wave_operator(n, alpha, ell):
    metric = ads_metric(n).perturbed("tx", 1, 2.0).perturbed("xx", 2, 0.3)
    p = TwistParams.from_alpha(n, alpha, 0.5)
    g = RadialGrid.make(40, 0.5)
    ops = assemble_operator(metric, p, ell, g)
    u = x_s ** sp.Float(alpha) * (1 + sp.Float(0.3) * x_s + x_s ** 2) \
        * sp.cos(sp.Float(1.3) * t_s + sp.Float(0.7) * x_s)
    t0 = 0.4
    want = sp.lambdify(x_s, wave_operator_oracle(metric, p, ell, u).subs(t_s, t0), "numpy")(g.points)
    d = {name: sp.lambdify(x_s, expr.subs(t_s, t0), "numpy")(g.points) for name, expr in {
        "u": u, "u_x": sp.diff(u, x_s), "u_xx": sp.diff(u, x_s, 2), "u_t": sp.diff(u, t_s),
        "u_tt": sp.diff(u, t_s, 2), "u_tx": sp.diff(u, t_s, x_s)}.items()}
    got = apply_normal_form(ops, **d)
    scale = np.abs(d["u_xx"]) + np.abs(d["u"]) / g.points ** 2
    assert np.max(np.abs(got - want) / scale) < 1e-10


def test_exact_ads_has_model_limit():
    p = TwistParams.from_alpha(4, 1.5, 0.5)
    g = RadialGrid.make(200, 0.5)
    ops = assemble_operator(ads_metric(4), p, 0, g)
    corr = ops.correction_arrays()
    small = g.points < 1e-2
    for name, arr in corr["second"].items():
        assert np.max(np.abs(arr[small]) / g.points[small] ** 2) < 10.0, name
    for name, arr in corr["first"].items():
        assert np.max(np.abs(arr[small]) / g.points[small]) < 10.0, name
    model = model_operator(p, 0, g)
    assert all(np.all(v == 0.0) for v in model.correction_arrays()["first"].values())


@given(st.floats(0.0, 50.0))
def test_coordinate_map_round_trip(r):
    x = coordinate_map(r)
    assert 0.0 < x <= 1.0
    assert inverse_coordinate_map(x) == pytest.approx(r, rel=1e-8, abs=1e-6)


def test_coordinate_map_domain():
    with pytest.raises(DomainError):
        coordinate_map(-1.0)
    with pytest.raises(DomainError):
        inverse_coordinate_map(1.5)


def test_metric_errors():
    with pytest.raises(SeriesOrderTooLow):
        ads_metric(4, K=1)
    p = TwistParams.from_alpha(4, 1.5, 0.5)
    g = RadialGrid.make(200, 0.5)
    slow = ads_metric(4).perturbed("xx", -1, 0.5)  # factored remainder O(x)
    assert not aads_decay_check(slow, g).pass_
    with pytest.raises(NotAAdS):
        assemble_operator(slow, p, 0, g)
