import numpy as np
import pytest

from holowave.boundary import bump_datum
from holowave.errors import DepthTooShallow, ExponentTooSmall, MaxIterExceeded
from holowave.geometry import ads_metric
from holowave.angular import ZonalBasis
from holowave.holography import (FieldJet, NonlinearitySpec, check_depth, eval_Q, evolution_grid,
                                 layer_jet, nonlinear_exponent_threshold, nonlinear_source,
                                 remainder_jet, solve_linear_ibvp, solve_nonlinear_ibvp, x_norm)
from holowave.twisted import TwistParams

P = TwistParams.from_alpha(4, 1.5, 0.5)


@pytest.fixture(scope="module")
def linear_solution():
    f = bump_datum(0, 0.9, 0.4)
    return solve_linear_ibvp(f, 2, 1, ads_metric(4), P, 1.6, grid=evolution_grid(200, 0.5),
                             stride=10)


def test_depth_condition():
    check_depth(2, 1, P)  # 2 > (1 + 1 + 1.5) / 2
    with pytest.raises(DepthTooShallow) as info:
        check_depth(1, 1, P)
    assert info.value.code == "HW601"
    with pytest.raises(DepthTooShallow):
        solve_linear_ibvp(bump_datum(), 1, 1, None, P, 1.0)


def test_exponent_conditions():
    with pytest.raises(ExponentTooSmall):
        NonlinearitySpec(q=3.0).check(P)
    need = nonlinear_exponent_threshold(P, 1)
    nl = NonlinearitySpec(q=0.5 * (P.alpha + 2.0 + need))
    if nl.q <= need:
        with pytest.raises(ExponentTooSmall):
            solve_nonlinear_ibvp(bump_datum(), 2, 1, nl, None, P, 1.0)


def test_field_vanishes_before_the_datum(linear_solution):
    rep = linear_solution.reports["causality"]
    assert rep.pass_ and not rep.notes["vacuous"]
    early = linear_solution.times < 0.5
    assert np.all(linear_solution.total_field()[early] == 0.0)


def test_boundary_values_follow_the_datum(linear_solution):
    assert linear_solution.boundary_error() < 5e-3
    assert np.max(np.abs(linear_solution.datum_values())) > 0.1


def test_solution_is_linear_in_the_datum(linear_solution):
    f = bump_datum(0, 0.9, 0.4, amplitude=-2.5)
    scaled = solve_linear_ibvp(f, 2, 1, ads_metric(4), P, 1.6, grid=evolution_grid(200, 0.5),
                               stride=10)
    base = linear_solution.total_field()
    np.testing.assert_allclose(scaled.total_field(), -2.5 * base, rtol=0,
                               atol=1e-11 * np.max(np.abs(base)))


def test_save_writes_artifacts(linear_solution, tmp_path):
    linear_solution.save(tmp_path)
    assert any(tmp_path.rglob("*.csv")) or any(tmp_path.rglob("*.json"))


def test_iteration_cap():
    q = nonlinear_exponent_threshold(P, 1) + 0.5
    with pytest.raises(MaxIterExceeded):
        solve_nonlinear_ibvp(bump_datum(0, 0.9, 0.4), 2, 1, NonlinearitySpec(q=q), None, P, 1.2,
                             max_iter=1, tol=1e-30, grid=evolution_grid(150, 0.5), stride=10)


def test_cutoff_choice_is_below_scheme_error():
    f = bump_datum(0, 0.9, 0.4)

    def final(npts, a0):
        sol = solve_linear_ibvp(f, 2, 1, ads_metric(4), P, 1.6, grid=evolution_grid(npts, 0.5),
                                stride=10, a0_factor=a0)
        return sol.total_field()[-1, 0]

    coarse, fine = final(200, 0.5), final(400, 0.5)
    x1, x2 = evolution_grid(200, 0.5).points, evolution_grid(400, 0.5).points
    scheme = np.max(np.abs(np.interp(x1, x2, fine) - coarse))
    d_coarse = np.max(np.abs(final(200, 0.35) - coarse))
    d_fine = np.max(np.abs(final(400, 0.35) - fine))
    assert d_coarse < scheme and d_fine < 0.5 * d_coarse


def _q_spec():
    return NonlinearitySpec(q=nonlinear_exponent_threshold(P, 1) + 0.5)


def test_q_is_symmetric_and_bilinear(linear_solution):
    jet = remainder_jet(linear_solution.remainder)
    other = FieldJet(jet.modes, jet.value ** 2, 2.0 * jet.value * jet.dx, 2.0 * jet.value * jet.dt)
    nl, ops = _q_spec(), linear_solution.remainder.ops
    uv, vu = eval_Q(jet, other, nl, ops, P), eval_Q(other, jet, nl, ops, P)
    scale = np.max(np.abs(uv))
    assert scale > 0 and np.max(np.abs(uv - vu)) <= 1e-14 * scale
    zero = FieldJet(jet.modes, *(np.zeros_like(jet.value),) * 3)
    assert not np.any(eval_Q(zero, jet, nl, ops, P))
    twice = FieldJet(jet.modes, 2 * jet.value, 2 * jet.dx, 2 * jet.dt)
    np.testing.assert_allclose(eval_Q(twice, other, nl, ops, P), 2 * uv, rtol=1e-13,
                               atol=1e-14 * scale)


def test_disabled_nonlinearity_is_the_linear_solve(linear_solution):
    f = bump_datum(0, 0.9, 0.4)
    sol, log = solve_nonlinear_ibvp(f, 2, 1, NonlinearitySpec(q=10.0, enabled=False),
                                    ads_metric(4), P, 1.6, grid=evolution_grid(200, 0.5),
                                    stride=10)
    assert log == []
    np.testing.assert_array_equal(sol.total_field(), linear_solution.total_field())


def test_lipschitz_surrogate_is_bounded(linear_solution):
    # N(Psi) - N(s Psi) = (1 - s^2) Q(Psi, Psi) + 2 (1 - s) Q(R, Psi), so the quotient
    # by ||Psi - s Psi|| stays within a factor two over s in [0, 1)
    traj = linear_solution.remainder
    grid, modes = traj.grid, traj.modes
    layers = layer_jet(linear_solution.peeled, grid, traj.times, modes)
    nl, basis = _q_spec(), ZonalBasis(P.n, 0)
    psi = remainder_jet(traj)
    base = nonlinear_source(psi, layers, nl, traj.ops, P, basis, include_layers_square=False)
    w = grid.weights
    quotients = []
    for s in (0.9, 0.5, 0.1):
        sp = FieldJet(modes, s * psi.value, s * psi.dx, s * psi.dt)
        diff = base - nonlinear_source(sp, layers, nl, traj.ops, P, basis, False)
        num = np.max(np.sqrt(np.sum(w * diff ** 2, axis=-1)))
        den = x_norm((1 - s) * traj.u, (1 - s) * traj.u_t, grid, modes, 1, P)
        quotients.append(num / den)
    assert np.all(np.isfinite(quotients))
    assert max(quotients) <= 2.0 * min(quotients)
