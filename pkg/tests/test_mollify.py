import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from jumpctl.drift import DriftDecomposition, Piece, PiecewiseLipschitzFn
from jumpctl.jumps import NO_JUMPS
from jumpctl.mollify import Mollifier, coupling_error, drift_error_integral, mollified_drift, mollify
from jumpctl.policy import ControlPolicy
from jumpctl.simulate import SimConfig, simulate_bundle

FREE = ControlPolicy.constant(0.0, -1.0, 1.0)
STEP = PiecewiseLipschitzFn.step((0.0,), (0.0, 1.0))


def test_kernel_mass_is_one():
    # 64-node quadrature of the flat bump is good to a few 1e-12
    assert Mollifier(8).mass() == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        Mollifier(0)


def test_zero_stays_zero():
    bn = mollify(PiecewiseLipschitzFn.zero(), 16)
    assert np.all(bn(np.linspace(-2, 2, 9)) == 0.0)


def test_unit_step_at_zero_gives_half():
    assert float(mollify(STEP, 10)(np.array(0.0))) == pytest.approx(0.5, abs=1e-12)


def test_exact_away_from_breakpoints(model):
    b2 = model.drift().b2
    bn = mollify(b2, 16)
    x = np.array([-3.0, -1.1, -0.9, 0.0, 0.9, 1.1, 3.0])
    assert np.array_equal(bn(x), b2(x))


def test_derivative_and_primitive(model):
    bn = mollify(model.drift().b2, 8)
    x = np.linspace(-2.0, 2.0, 41)
    eps = 1e-5
    fd = (bn(x + eps) - bn(x - eps)) / (2 * eps)
    assert np.allclose(bn.derivative(x), fd, atol=1e-4)
    for v in (-1.7, -1.0, -0.2, 0.95, 1.5):
        ref, _ = integrate.quad(lambda y: float(bn(np.array(y))), 0.0, v, points=[-1.0, 1.0], limit=200)
        assert float(bn.primitive(np.array(v))) == pytest.approx(ref, abs=1e-8)
    assert float(bn.primitive(np.array(0.0))) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.integers(1, 64))
def test_bounded_by_base(x, n):
    bn = mollify(PiecewiseLipschitzFn.step((-1.0, 1.0), (-1.0, 0.0, 1.0)), n)
    assert abs(float(bn(np.array(x)))) <= bn.global_bound + 1e-12


def test_affine_base_is_unchanged():
    b2 = PiecewiseLipschitzFn((), (Piece.affine(0.3, 0.1),), 10.0)
    x = np.linspace(-3, 3, 13)
    assert np.allclose(mollify(b2, 4)(x), b2(x))


def test_drift_error_zero_when_mollification_is_exact():
    b2 = PiecewiseLipschitzFn((), (Piece.affine(0.3, 0.1),), 10.0)
    b = simulate_bundle(DriftDecomposition(b2=b2), FREE, NO_JUMPS, SimConfig(1.0, 0.1, 50, sigma=0.5), 0.0)
    est = drift_error_integral(b2, 8, b)
    assert est.mean == 0.0


def test_coupling_zero_when_path_avoids_bumps():
    b2 = PiecewiseLipschitzFn.step((0.0,), (1.0, -1.0))
    d = DriftDecomposition(b2=b2)
    # starts at 5 and drifts down by at most T
    est = coupling_error(d, 16, FREE, NO_JUMPS, SimConfig(1.0, 0.01, 4), 5.0)
    assert est.mean == 0.0


def test_coupling_small_for_lipschitz_b2():
    b2 = PiecewiseLipschitzFn((), (Piece(lambda x: -np.tanh(np.asarray(x)), 1.0),), 1.0)
    d = DriftDecomposition(b2=b2)
    est = coupling_error(d, 256, FREE, NO_JUMPS, SimConfig(1.0, 1e-3, 200, sigma=0.3), 0.0)
    assert est.mean < 1e-4


def test_mollified_drift_replaces_b2(model):
    d = mollified_drift(model.drift(), 16)
    assert d.b2.n == 16 and d.b2.breakpoints == ()
    x = np.array([0.5])
    assert np.allclose(d(x, 1.0), model.drift()(x, 1.0))
