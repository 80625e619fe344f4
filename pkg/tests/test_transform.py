import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumpctl.drift import DriftDecomposition, PiecewiseLipschitzFn
from jumpctl.errors import ZeroJump
from jumpctl.jumps import NO_JUMPS
from jumpctl.policy import ControlPolicy
from jumpctl.simulate import SimConfig, simulate_path
from jumpctl.transform import (TransformG, discontinuity_coefficients, lipschitz_estimate, phi_bump, select_c,
                               simulate_transformed, transformed_coefficients)

FREE = ControlPolicy.constant(0.0, -1.0, 1.0)


def test_phi_bump_values():
    assert phi_bump(0.0) == 1.0
    assert phi_bump(1.0) == 0.0 and phi_bump(-1.0) == 0.0
    assert phi_bump(0.5) == pytest.approx(0.421875)
    assert phi_bump(3.0) == 0.0


def test_surplus_coefficients(model):
    assert discontinuity_coefficients(model.drift()) == [(-1.0, -0.5), (1.0, -0.5)]
    assert select_c(discontinuity_coefficients(model.drift())) == pytest.approx(0.3)


def test_down_step_coefficient_and_c():
    b2 = PiecewiseLipschitzFn.step((0.0,), (1.0, -1.0))
    coeffs = discontinuity_coefficients(DriftDecomposition(b2=b2))
    assert coeffs == [(0.0, 1.0)]
    assert select_c(coeffs) == pytest.approx(0.15)


def test_removable_breakpoint_raises():
    b2 = PiecewiseLipschitzFn.step((0.0, 1.0), (2.0, 2.0, 3.0))
    with pytest.raises(ZeroJump) as err:
        discontinuity_coefficients(DriftDecomposition(b2=b2))
    assert list(err.value.breakpoints) == [0.0]


def test_select_c_needs_breakpoints():
    with pytest.raises(ValueError):
        select_c([])


def test_identity_transform():
    G = TransformG.identity()
    x = np.linspace(-3, 3, 7)
    assert np.array_equal(G(x), x) and np.all(G.prime(x) == 1) and np.all(G.second(x) == 0)
    assert np.array_equal(G.inverse(x), x)


def test_nodes_are_fixed_points(model):
    G = TransformG.from_drift(model.drift())
    for xi in G.xi:
        assert float(G(np.array(xi))) == xi
        assert float(G.prime(np.array(xi))) == 1.0
        assert abs(float(G.inverse(G(np.array(xi)))) - xi) < 1e-12


def test_identity_outside_bumps(model):
    G = TransformG.from_drift(model.drift())
    x = np.array([-5.0, -1.31, -0.69, 0.0, 0.69, 1.31, 5.0])
    assert np.array_equal(G(x), x)


def test_jump_is_removed_from_transformed_drift(model):
    # with alpha scaled by sigma^2, b-bar is continuous at the breakpoints
    d = model.drift()
    G = TransformG.from_drift(d, sigma=model.sim_sigma)
    tc = transformed_coefficients(G, d, model.sim_sigma)
    for xi in G.xi:
        left, right = tc.bar_b(np.array(xi - 1e-9)), tc.bar_b(np.array(xi + 1e-9))
        assert abs(float(left - right)) < 1e-6
    assert lipschitz_estimate(tc.bar_b, -3, 3) < 1e3


def test_transformed_coefficients_identity():
    d = DriftDecomposition.linear(-1.0)
    tc = transformed_coefficients(TransformG.identity(), d, 0.4)
    y = np.linspace(-2, 2, 5)
    assert np.allclose(tc.bar_b(y), -y) and np.allclose(tc.bar_sigma(y), 0.4)
    assert np.allclose(tc.bar_gamma(y, 0.7), 0.7)


def test_transformed_drift_equals_drift_outside_bumps(model):
    d = model.drift()
    G = TransformG.from_drift(d)
    tc = transformed_coefficients(G, d, model.sim_sigma)
    y = np.array([-3.0, 0.2, 2.5])
    assert np.allclose(tc.bar_b(y), d(y, 0.0))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-3, 3).filter(lambda a: abs(a) > 1e-3)),
                min_size=1, max_size=4, unique_by=lambda p: round(p[0], 2)),
       st.floats(-20, 20))
def test_monotone_and_round_trip(coeffs, x):
    coeffs = sorted(coeffs)
    if any(b[0] - a[0] < 0.05 for a, b in zip(coeffs, coeffs[1:])):
        return
    G = TransformG.from_coefficients(coeffs)
    grid = np.linspace(-10, 10, 2001)
    assert G.prime(grid).min() > 0
    assert abs(float(G.inverse(G(np.array(x)))) - x) < 1e-10


def test_round_trip_grid(model):
    G = TransformG.from_drift(model.drift())
    x = np.random.default_rng(0).uniform(-10, 10, 100_000)
    assert np.max(np.abs(G.inverse(G(x)) - x)) < 1e-10


def test_identity_transform_path_matches_direct():
    d = DriftDecomposition.linear(-0.5)
    cfg = SimConfig(1.0, 0.01, sigma=0.3, seed=3)
    p1 = simulate_path(d, FREE, NO_JUMPS, cfg, 0.2)
    p2 = simulate_transformed(d, FREE, NO_JUMPS, cfg, 0.2)
    assert np.array_equal(p1.states, p2.states)


def test_piecewise_ode_flow():
    # b = -sgn(x): from 0.5 the exact flow reaches 0 at t=0.5 and stays there
    b2 = PiecewiseLipschitzFn.step((0.0,), (1.0, -1.0))
    d = DriftDecomposition(b2=b2)
    dt = 1e-3
    p = simulate_transformed(d, FREE, NO_JUMPS, SimConfig(1.0, dt), 0.5)
    exact = np.maximum(0.5 - p.times, 0.0)
    assert np.max(np.abs(p.states - exact)) < 5 * dt
