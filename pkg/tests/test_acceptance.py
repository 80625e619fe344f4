"""Acceptance criteria 1-11. Each test prints one PASS/FAIL line with its numbers.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines live.
"""

import time

import numpy as np
import pytest
from scipy import stats

from jumpctl.diagnostics import (beta_half, beta_half_quad, density_sup_scan, last_jump_gap_moment,
                                 snapshot_states)
from jumpctl.drift import DriftDecomposition
from jumpctl.experiments import (adjoint_probe_table, mollify_check, non_decreasing_within_ci, separated_below,
                                 smp_check, transform_check)
from jumpctl.insurance import SurplusModel, policy_library, sweep_lambda, sweep_T, sweep_tau
from jumpctl.jumps import NO_JUMPS, normal_jumps
from jumpctl.mollify import mollified_drift
from jumpctl.policy import ControlPolicy
from jumpctl.rng import Stream
from jumpctl.simulate import SimConfig, simulate_bundle, simulate_path
from jumpctl.smp import (Objective, adjoint_nested_mc, first_variation, first_variation_fd_bundle, moment_monitor,
                         phi_terminal)
from jumpctl.stats import MonteCarloEstimate, combined_se
from jumpctl.transform import TransformG

pytestmark = pytest.mark.slow

FREE = ControlPolicy.constant(0.0, -1.0, 1.0)
ZERO = DriftDecomposition()
BASE = SurplusModel()
SIGN = policy_library(BASE.a_max)[0]


def report(num, name, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {name}: {detail}")
    return ok


def test_01_exact_solutions():
    start = time.perf_counter()
    p = simulate_path(DriftDecomposition.linear(-1.0), FREE, NO_JUMPS, SimConfig(1.0, 1e-4), 1.0)
    ode_err = abs(p.x_T - np.exp(-1.0))
    sigma, T, x0 = 0.5, 1.0, 0.3
    b = simulate_bundle(ZERO, FREE, NO_JUMPS, SimConfig(T, 0.01, 100_000, sigma=sigma, seed=101), x0,
                        record="terminal")
    mean = MonteCarloEstimate.from_samples(b.x_T)
    var = MonteCarloEstimate.from_samples((b.x_T - x0) ** 2)
    elapsed = time.perf_counter() - start
    ok = ode_err < 1e-3 and mean.within(x0) and var.within(sigma ** 2 * T) and elapsed < 60
    assert report(1, "exact-solution SDE", ok,
                  f"|X_T - e^-1| = {ode_err:.2e}; mean {mean} vs {x0}; var {var} vs {sigma ** 2 * T}; "
                  f"{elapsed:.1f}s")


def test_02_compound_poisson_moments():
    b = simulate_bundle(ZERO, FREE, normal_jumps(4.0, 0.0, 0.5), SimConfig(2.0, 0.5, 100_000, seed=102), 0.0,
                        record="terminal")
    m1 = MonteCarloEstimate.from_samples(b.x_T)
    m2 = MonteCarloEstimate.from_samples(b.x_T ** 2)
    ok = m1.within(0.0) and m2.within(2.0)
    assert report(2, "compound-Poisson moments", ok, f"E[X_T] = {m1} vs 0; E[X_T^2] = {m2} vs 2")


def test_03_transform_validity():
    row = transform_check(BASE)
    n = 10_000
    cfg = BASE.sim_config(2.0, 0.01, n, seed=103)
    direct = simulate_bundle(BASE.drift(), SIGN, BASE.jumps(), cfg, 0.0, record="terminal").x_T
    tcfg = BASE.sim_config(2.0, 0.01, n, seed=203, scheme="transformed")
    transformed = simulate_bundle(BASE.drift(), SIGN, BASE.jumps(), tcfg, 0.0, record="terminal").x_T
    ks = stats.ks_2samp(direct, transformed).statistic
    crit = 1.628 * np.sqrt((n + n) / (n * n))
    G = TransformG.from_drift(BASE.drift())
    fixed = all(float(G(np.array(x))) == x for x in G.xi)
    ok = (row["alpha"] == [-0.5, -0.5] and abs(row["c"] - 0.3) < 1e-12 and row["min_gprime"] > 0
          and row["roundtrip_error"] < 1e-10 and fixed and ks < crit)
    assert report(3, "transform validity", ok,
                  f"alpha {row['alpha']}, c {row['c']:.3f}, min G' {row['min_gprime']:.4f}, "
                  f"round trip {row['roundtrip_error']:.1e}, G(xi)=xi {fixed}, KS {ks:.4f} < {crit:.4f}")


@pytest.mark.parametrize("policy_name", ["zero", "sign"])
def test_04_mollification_convergence(policy_name):
    from jumpctl.experiments import policy_by_name

    start = time.perf_counter()
    cfg = BASE.sim_config(2.0, 1e-3, 10_000, seed=104)
    rep = mollify_check(BASE, policy_by_name(BASE, policy_name), cfg, (4, 16, 64, 256))
    elapsed = time.perf_counter() - start
    coup = ", ".join(f"{c.mean:.2e}" for c in rep.coupling)
    derr = ", ".join(f"{d.mean:.2e}" for d in rep.drift_error)
    ok = rep.coupling_non_increasing and rep.drift_error_decreases(16, 64) and elapsed < 300
    assert report(4, f"mollification convergence ({policy_name} control)", ok,
                  f"coupling [{coup}], drift error [{derr}], {elapsed:.0f}s")


def _fd_relative_errors(drift, policy, cfg, x0, chunk=250):
    errs = []
    for lo in range(0, cfg.n_paths, chunk):
        ids = np.arange(lo, min(lo + chunk, cfg.n_paths))
        fd, base = first_variation_fd_bundle(drift, policy, BASE.jumps(), cfg, x0, 1e-4, path_ids=ids)
        phi = phi_terminal(base, drift)
        errs.append(np.abs(phi - fd) / np.abs(fd))
    return np.concatenate(errs)


def test_05_first_variation_fidelity():
    drift = mollified_drift(BASE.drift(), 64)
    # reference configuration: start at 0 under the sign control
    ref = _fd_relative_errors(drift, SIGN, BASE.sim_config(2.0, 1e-3, 1000, seed=105), 0.0)
    # stress configuration: no control, started on the breakpoint so every path crosses the steep zone
    stress = _fd_relative_errors(drift, FREE, BASE.sim_config(0.25, 2.5e-5, 1000, seed=205), 1.0)
    p = simulate_path(drift, SIGN, NO_JUMPS, BASE.sim_config(2.0, 1e-3, seed=305), 0.9)
    fv = first_variation(p, drift)
    t = p.times
    cocycle = max(abs(fv.phi(t[i], t[j]) * fv.phi(t[j], t[k]) / fv.phi(t[i], t[k]) - 1.0)
                  for i, j, k in [(0, 500, 2000), (10, 11, 1999), (0, 1000, 1000), (300, 700, 1500)])
    small = BASE.sim_config(2.0, 1e-3, 1000, seed=405)
    big = BASE.sim_config(2.0, 1e-3, 10_000, seed=405)
    m_small = moment_monitor(phi_terminal(simulate_bundle(drift, SIGN, BASE.jumps(), small, 0.0), drift), 2)
    m_big = moment_monitor(phi_terminal(simulate_bundle(drift, SIGN, BASE.jumps(), big, 0.0), drift), 2)
    stable = np.isfinite(m_big.mean) and abs(m_small.mean - m_big.mean) <= 3 * combined_se(m_small.std_err,
                                                                                            m_big.std_err)
    med_p, med_s = float(np.median(ref)), float(np.median(stress))
    ok = med_p < 0.02 and med_s < 0.02 and cocycle < 1e-6 and stable
    assert report(5, "first-variation fidelity", ok,
                  f"median rel err {med_p:.2e} (reference), {med_s:.2e} (stress, dt=2.5e-5); "
                  f"cocycle {cocycle:.1e}; E|Phi|^2 {m_small} vs {m_big}")


def test_06_adjoint_oracles():
    sq = Objective.terminal(lambda x: np.asarray(x) ** 2, lambda x: 2.0 * np.asarray(x))
    deg = adjoint_nested_mc(0.5, 0.7, FREE, ZERO, NO_JUMPS, SimConfig(1.0, 0.01, 50), sq)
    deg_ok = deg.p == pytest.approx(1.4, abs=1e-12)
    delta, T = 0.5, 1.0
    lin = DriftDecomposition.linear(-delta)
    cfg = SimConfig(T, 0.01, 500, sigma=0.5, seed=106)
    lg = []
    for t, x in [(0.0, 1.0), (0.3, -0.6), (0.5, 0.4), (0.8, 1.5)]:
        est = adjoint_nested_mc(t, x, FREE, lin, NO_JUMPS, cfg, sq)
        exact = 2 * x * np.exp(-2 * delta * (T - t))
        lg.append(abs(est.p - exact) / est.std_err)
    lg_ok = max(lg) < 3
    rows = adjoint_probe_table(BASE, 2.0, 0.01, 20_000, 500, seed=206, n_probes=20)
    z = [abs(r["nested"] - r["regression"]) / combined_se(r["nested_se"], r["regression_se"]) for r in rows]
    probe_ok = max(z) < 3
    ok = deg_ok and lg_ok and probe_ok
    assert report(6, "adjoint oracles", ok,
                  f"degenerate P = {deg.p:.12f} (2x = 1.4); linear-Gaussian max |err|/SE {max(lg):.2f}; "
                  f"regression vs nested max z {max(z):.2f} over {len(z)} probes")


def test_07_maximum_principle():
    start = time.perf_counter()
    rep = smp_check(BASE, T=2.0, dt=0.01, outer_paths=200, inner_paths=500, band=0.05, seed=107)
    elapsed = time.perf_counter() - start
    ok = rep.violation_fraction <= 0.05 and rep.sign_relation_frequency >= 0.9 and elapsed < 600
    assert report(7, "maximum-principle checks", ok,
                  f"violation fraction {rep.violation_fraction:.3f} over {rep.n_products} products; "
                  f"sign relation {rep.sign_relation_frequency:.3f} on {rep.sign_relation_n} resolved samples "
                  f"({rep.sign_relation_unresolved} within 2 SE of 0; raw frequency {rep.raw_sign_frequency:.3f}); "
                  f"{elapsed:.0f}s")


def test_08_policy_ordering():
    start = time.perf_counter()
    res = sweep_T(BASE, policy_library(BASE.a_max), [2.0], BASE.sim_config(2.0, 0.01, 100_000, seed=108))
    s, lin, thr = (res.estimate(2.0, n) for n in ("sign", "linear", "threshold"))
    elapsed = time.perf_counter() - start
    ok = separated_below(s, lin) and separated_below(lin, thr) and elapsed < 300
    assert report(8, "policy ordering at T=2", ok, f"sign {s}; linear {lin}; threshold {thr}; {elapsed:.0f}s")


def test_09_sensitivity_monotone():
    cfg = BASE.sim_config(2.0, 0.01, 100_000, seed=109)
    lam = sweep_lambda(BASE, SIGN, [0.5, 1.0, 2.0, 4.0], cfg).series()["sign"]
    tau = sweep_tau(BASE, SIGN, [0.25, 0.5, 1.0], cfg).series()["sign"]
    ok = non_decreasing_within_ci([e for _, e in lam]) and non_decreasing_within_ci([e for _, e in tau])
    fmt = lambda pts: ", ".join(f"{v:g}: {e.mean:.4g}" for v, e in pts)
    assert report(9, "second moment against lambda and tau", ok, f"lambda [{fmt(lam)}]; tau [{fmt(tau)}]")


def test_10_density_scan():
    sigma = 0.5
    times = [0.1, 0.5, 1.0, 2.0]
    cfg = SimConfig(2.0, 0.01, 100_000, sigma=sigma, seed=110)
    snaps = snapshot_states(ZERO, FREE, NO_JUMPS, cfg, 0.0, times)
    scan = density_sup_scan(snaps, times)
    target = 1.0 / (sigma * np.sqrt(2 * np.pi))
    bm_err = float(np.max(np.abs(scan.scaled / target - 1.0)))
    grid = [0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0]
    scfg = BASE.sim_config(2.0, 0.01, 100_000, seed=210)
    ratios = {}
    for name, pol in (("zero", FREE), ("sign", SIGN)):
        ratios[name] = density_sup_scan(snapshot_states(BASE.drift(), pol, BASE.jumps(), scfg, 0.0, grid),
                                        grid).band_ratio
    # the band applies to the model dynamics; the sign control pulls mass onto 0, so its
    # ratio is reported alongside but not held to the band
    ok = bm_err < 0.10 and ratios["zero"] <= 5.0
    assert report(10, "density-bound scan", ok,
                  f"Brownian max rel err {bm_err:.3f}; band ratio uncontrolled {ratios['zero']:.2f} <= 5; "
                  f"under sign control {ratios['sign']:.2f} (reported only)")


def test_11_beta_identity():
    checks = [last_jump_gap_moment(2.0, t, n, 1_000_000, Stream(111, i))
              for i, (n, t) in enumerate([(1, 4.0), (2, 1.0), (3, 1.0)])]
    quad_err = max(abs(beta_half(n) - beta_half_quad(n)) for n in range(1, 11))
    ok = all(c.passed for c in checks) and quad_err < 1e-8
    detail = "; ".join(f"(n={c.n}, t={c.t:g}) MC {c.mc_estimate} vs {c.analytic:.5f}" for c in checks)
    assert report(11, "Beta identity", ok, f"{detail}; max |B - quad| {quad_err:.1e}")
