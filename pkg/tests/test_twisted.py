import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holowave.errors import (BelowThreshold, EmptyWindow, GridMismatch, IndexBudget,
                             NegativeOrder, ParameterOrder, SignChange)
from holowave.grid import RadialGrid
from holowave.twisted import (GridFunction, TwistParams, alpha_from_mu, decay_slope, inner,
                              op_A, op_A_star, ordered_twist, stagger, twist_d, twist_d_star,
                              weighted_norm, hardy_report, moser_report)

alphas = st.sampled_from([0.5, 1.0, 1.5, 2.5])
seeds = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=30, deadline=None)
@given(alphas, seeds)
def test_summation_by_parts(alpha, seed):
    rng = np.random.default_rng(seed)
    g = RadialGrid.make(60, 0.7)
    u_vals = rng.standard_normal(g.size)
    u_vals[-1] = 0.0
    u = GridFunction(g, u_vals)
    v = GridFunction(g, rng.standard_normal(g.size), staggered=True, alpha=alpha)
    lhs, rhs = inner(twist_d(u, alpha), v), inner(u, twist_d_star(v, alpha))
    scale = np.sqrt(inner(twist_d(u, alpha), twist_d(u, alpha)) * inner(v, v))
    assert abs(lhs - rhs) <= 1e-12 * scale


@settings(max_examples=20, deadline=None)
@given(alphas, seeds)
def test_A_is_right_inverse_of_D(alpha, seed):
    rng = np.random.default_rng(seed)
    g = RadialGrid.make(80, 1.0)
    phi = GridFunction(g, rng.standard_normal(g.size), staggered=True, alpha=alpha)
    back = twist_d(op_A(phi, alpha), alpha).values
    np.testing.assert_allclose(back, phi.values, rtol=1e-10, atol=1e-12 * np.abs(phi.values).max())


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.5])
def test_kernels(alpha):
    g = RadialGrid.make(200, 1.0)
    x = g.points
    # x^-alpha has constant detwisted value, so D annihilates it exactly
    k = twist_d(GridFunction(g, x ** -alpha, trace=1.0), alpha).values
    assert np.max(np.abs(k)) <= 1e-12 * np.max(stagger(g, alpha).coef)
    # D x^alpha is exact, so D*D x^alpha vanishes away from the outer edge
    u = GridFunction(g, x ** alpha)
    dd = twist_d_star(twist_d(u, alpha), alpha).values[:-1]
    assert np.max(np.abs(dd)) <= 1e-8 * np.max(np.abs(twist_d(u, alpha).values)) / x[0]


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_D_converges_to_continuum(alpha):
    errs = []
    for npts in (200, 400, 800):
        g = RadialGrid.make(npts, 1.0, "uniform")
        u = GridFunction(g, np.sin(2.0 * g.points))
        du = twist_d(u, alpha)
        y = du.points
        exact = 2.0 * np.cos(2.0 * y) + alpha * np.sin(2.0 * y) / y
        errs.append(np.max(np.abs(du.values - exact)[y > 0.1]))
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_A_star_inverts_D_star():
    g = RadialGrid.make(300, 1.0)
    psi = GridFunction(g, np.cos(g.points))
    back = twist_d_star(op_A_star(psi, 1.5), 1.5).values
    w = g.weights
    err = np.sqrt(np.sum(w * (back - psi.values) ** 2) / np.sum(w * psi.values ** 2))
    assert err < 1e-12


def test_parameter_errors():
    assert alpha_from_mu(4, 0.0) == pytest.approx(1.5)
    assert TwistParams.from_alpha(4, 0.5).alpha == pytest.approx(0.5)
    with pytest.raises(BelowThreshold) as info:
        alpha_from_mu(4, -2.25)
    assert info.value.code == "HW101"
    with pytest.raises(BelowThreshold):
        TwistParams(4, -3.0)


def test_representation_errors():
    g, h = RadialGrid.make(40), RadialGrid.make(50)
    with pytest.raises(GridMismatch):
        GridFunction(g, np.zeros(g.size)) + GridFunction(h, np.zeros(h.size))
    with pytest.raises(GridMismatch):
        GridFunction(g, np.zeros(3))
    with pytest.raises(NegativeOrder):
        ordered_twist(-1, GridFunction(g, np.zeros(g.size)), 1.5)
    with pytest.raises(GridMismatch):
        twist_d(GridFunction(g, np.zeros(g.size), staggered=True, alpha=1.5), 1.5)


def test_decay_slope_and_its_errors():
    g = RadialGrid.make(400, 1.0)
    u = GridFunction(g, 3.0 * g.points ** 1.7)
    assert decay_slope(u, (1e-3, 1e-1)) == pytest.approx(1.7, abs=1e-10)
    with pytest.raises(EmptyWindow):
        decay_slope(u, (2.0, 3.0))
    with pytest.raises(SignChange):
        decay_slope(GridFunction(g, np.sin(20 * g.points)), (0.1, 1.0))


def test_weighted_norm_l2_of_power():
    p = TwistParams.from_alpha(4, 1.5, 1.0)
    g = RadialGrid.make(4000, 1.0, "geometric", x_min_factor=1e-6)
    # int_0^1 x^2 x dx = 1/4
    assert weighted_norm(GridFunction(g, g.points), "L2", 0, p) == pytest.approx(0.5, rel=1e-4)


def test_index_errors():
    p = TwistParams.from_alpha(4, 1.5)
    g = RadialGrid.make(100)
    u = GridFunction(g, np.zeros(g.size))
    with pytest.raises(IndexBudget):
        moser_report(u, u, 2, (1, 0, 1, 0), p)
    with pytest.raises(ParameterOrder):
        hardy_report([lambda xi: xi], 2.0, 2.5, [0.5], p)
