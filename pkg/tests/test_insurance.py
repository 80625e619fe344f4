import numpy as np
import pytest

from jumpctl.experiments import non_decreasing_within_ci
from jumpctl.insurance import SurplusModel, policy_library, second_moment, sigma_bar, sweep_lambda, sweep_T


def test_sigma_bar_examples():
    assert sigma_bar(0.0, 0.0, 0.5) == 0.0
    assert sigma_bar(4.0, 0.0, 0.0) == 0.0
    assert sigma_bar(4.0, 0.0, 0.5) == pytest.approx(1.0)


def test_surplus_drift_structure(model):
    b2 = model.drift().b2
    assert b2.breakpoints == (-1.0, 1.0)
    assert b2.left_limits == (-1.0, 0.0) and b2.right_limits == (0.0, 1.0)


def test_beta_zero_has_no_b2():
    assert not SurplusModel(beta=0.0).drift().has_b2


def test_drift_inside_band(model):
    x = np.array([-0.9, 0.0, 0.4])
    assert np.allclose(model.drift()(x, 1.5), -0.05 * x - 1.5)


def test_invalid_model_rejected():
    with pytest.raises(ValueError):
        SurplusModel(H=0.0)
    with pytest.raises(ValueError):
        SurplusModel(lam=-1.0)


def test_policy_library_examples():
    sign, linear, threshold = policy_library(2.0)
    assert float(sign(0.0, np.array(0.3))) == 2.0
    assert float(sign(0.0, np.array(0.0))) == 0.0
    assert float(threshold(0.0, np.array(2.5))) == 1.0 and float(threshold(0.0, np.array(2.0))) == 0.0
    lit = policy_library(2.0, convention="literal")
    assert float(lit[1](0.0, np.array(5.0))) == -2.0
    assert float(linear(0.0, np.array(5.0))) == 2.0
    with pytest.raises(ValueError):
        policy_library(2.0, convention="other")


def test_jump_model_modes():
    exact = SurplusModel(diffusion_approx=False)
    assert exact.jumps().intensity == 2.0 and exact.sim_sigma == 0.2
    approx = SurplusModel()
    assert not approx.jumps().active
    assert approx.sim_sigma == pytest.approx(np.sqrt(0.04 + 0.5))


def test_short_horizon_is_near_zero(model):
    res = sweep_T(model, policy_library(), [1e-4], model.sim_config(1.0, 0.01, 2000))
    assert all(est.mean < 1e-3 for _, _, est in res.points)


def test_dispersion_grows_with_T(model):
    res = sweep_T(model, policy_library()[:1], [0.1, 1.0], model.sim_config(1.0, 0.01, 5000))
    pts = res.series()["sign"]
    assert non_decreasing_within_ci([e for _, e in pts])


def test_sweep_rows_and_common_seed(model):
    sign = policy_library()[0]
    res = sweep_lambda(model, sign, [0.0, 2.0], model.sim_config(1.0, 0.01, 1000))
    rows = list(res.rows())
    assert [r["axis_value"] for r in rows] == [0.0, 2.0]
    assert rows[1]["mean"] == second_moment(model, sign, 2.0, 0.01, 1000, 0).mean
    with pytest.raises(ValueError):
        sweep_T(model, [sign], [], model.sim_config(1.0, 0.01, 10))


def test_zero_lambda_is_sigma_only_baseline(model):
    sign = policy_library()[0]
    res = sweep_lambda(model, sign, [0.0], model.sim_config(2.0, 0.01, 1000))
    base = second_moment(SurplusModel(lam=0.0), sign, 2.0, 0.01, 1000, 0)
    assert res.points[0][2].mean == base.mean
