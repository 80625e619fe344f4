import numpy as np
import pytest

from jumpctl.diagnostics import (beta_half, beta_half_quad, density_sup_scan, gap_moment_analytic, kde_sup,
                                 last_jump_gap_moment, snapshot_states)
from jumpctl.drift import DriftDecomposition
from jumpctl.errors import EmptyBundle
from jumpctl.jumps import NO_JUMPS
from jumpctl.policy import ControlPolicy
from jumpctl.rng import Stream
from jumpctl.simulate import SimConfig, simulate_bundle


def test_beta_half_values():
    assert beta_half(1) == 2.0
    assert beta_half(2) == pytest.approx(4 / 3)
    assert beta_half(3) == pytest.approx(16 / 15)
    for n in range(1, 11):
        assert abs(beta_half(n) - beta_half_quad(n)) < 1e-8
    with pytest.raises(ValueError):
        beta_half(0)


def test_gap_moment_examples():
    assert gap_moment_analytic(1, 4.0) == pytest.approx(1.0)
    assert gap_moment_analytic(2, 1.0) == pytest.approx(8 / 3)
    chk = last_jump_gap_moment(2.0, 1.0, 2, 200_000, Stream(1, 0))
    assert chk.passed
    none = last_jump_gap_moment(0.0, 4.0, 3, 10)
    assert none.mc_estimate.mean == 0.5 and none.analytic == 0.5 and none.mc_estimate.std_err == 0.0


def test_kde_of_gaussian(rng):
    x = rng.normal(0.0, 2.0, 100_000)
    sup, bw = kde_sup(x)
    assert sup == pytest.approx(1 / (2.0 * np.sqrt(2 * np.pi)), rel=0.02)
    with pytest.raises(EmptyBundle):
        kde_sup([1.0])


def test_scan_from_bundle_and_duplicates():
    cfg = SimConfig(1.0, 0.01, 4000, sigma=1.0)
    b = simulate_bundle(DriftDecomposition(), ControlPolicy.constant(0, -1, 1), NO_JUMPS, cfg, 0.0)
    scan = density_sup_scan(b, [0.5, 1.0])
    assert scan.times.tolist() == [0.5, 1.0]
    snaps = {0.5: b.x_post[b.uniform_nodes()[:, 50]]}
    s1 = density_sup_scan(snaps)
    s2 = density_sup_scan({0.5: snaps[0.5].copy()})
    assert np.array_equal(s1.scaled, s2.scaled)
    assert s1.scaled[0] == scan.scaled[0]


def test_snapshot_matches_full_bundle(model):
    cfg = model.sim_config(1.0, 0.01, 300, seed=2)
    pol = ControlPolicy.sign(2.0)
    snaps = snapshot_states(model.drift(), pol, model.jumps(), cfg, 0.0, [0.25, 1.0])
    b = simulate_bundle(model.drift(), pol, model.jumps(), cfg, 0.0)
    assert np.array_equal(snaps[0.25], b.x_post[b.uniform_nodes()[:, 25]])
    assert np.array_equal(snaps[1.0], b.x_T)


def test_empty_scan_raises():
    with pytest.raises(EmptyBundle):
        density_sup_scan({}, None)
