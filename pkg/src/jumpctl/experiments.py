"""Check procedures shared by the command line, the scripts and the tests."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .insurance import SurplusModel, policy_library
from .mollify import coupling_error, drift_error_integral
from .simulate import SimConfig, simulate_bundle
from .smp import (HamiltonianCtx, Objective, adjoint_nested_mc_batch, adjoint_regression, closed_loop_drift,
                  necessary_condition_scan, sign_relation_check, zero_policy)
from .stats import MonteCarloEstimate
from .transform import TransformG, discontinuity_coefficients, select_c


def separated_below(a: MonteCarloEstimate, b: MonteCarloEstimate) -> bool:
    """True when the 95% interval of ``a`` lies entirely below that of ``b``."""
    return a.mean + a.ci95 < b.mean - b.ci95


def non_decreasing_within_ci(ests: Sequence[MonteCarloEstimate]) -> bool:
    return all(b.mean >= a.mean - (a.ci95 + b.ci95) for a, b in zip(ests, ests[1:]))


def non_increasing_within_ci(ests: Sequence[MonteCarloEstimate]) -> bool:
    return all(b.mean <= a.mean + (a.ci95 + b.ci95) for a, b in zip(ests, ests[1:]))


def policy_by_name(model: SurplusModel, name: str, convention: str = "stabilizing"):
    if name == "zero":
        return zero_policy()
    lib = {p.name: p for p in policy_library(model.a_max, 2.0, convention)}
    if name not in lib:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(lib) + ['zero']}")
    return lib[name]


# ---------------------------------------------------------------------------
# transform


def transform_check(model: SurplusModel, lo: float = -10.0, hi: float = 10.0, n: int = 200_001) -> dict:
    coeffs = discontinuity_coefficients(model.drift())
    c = select_c(coeffs)
    G = TransformG.from_coefficients(coeffs, c)
    x = np.linspace(lo, hi, n)
    return {
        "xi": [k for k, _ in coeffs],
        "alpha": [a for _, a in coeffs],
        "c": c,
        "min_gprime": float(G.prime(x).min()),
        "roundtrip_error": float(np.max(np.abs(G.inverse(G(x)) - x))),
        "fixed_point_error": float(max(abs(float(G(np.array(k))) - k) for k, _ in coeffs)),
    }


# ---------------------------------------------------------------------------
# mollification


@dataclass
class MollifyReport:
    n_values: list
    coupling: list
    drift_error: list

    @property
    def coupling_non_increasing(self) -> bool:
        return non_increasing_within_ci(self.coupling)

    def drift_error_decreases(self, n_from: int = 16, n_to: int = 64) -> bool:
        i, j = self.n_values.index(n_from), self.n_values.index(n_to)
        return self.drift_error[j].mean < self.drift_error[i].mean

    def rows(self):
        for n, c, d in zip(self.n_values, self.coupling, self.drift_error):
            yield {"n": n, "coupling_error": c.mean, "ci95": c.ci95,
                   "drift_error_integral": d.mean, "drift_ci95": d.ci95}


def mollify_check(model: SurplusModel, policy, cfg: SimConfig, n_values=(4, 16, 64, 256),
                  bundle_dt: float = 0.01) -> MollifyReport:
    drift = model.drift()
    coupling = [coupling_error(drift, n, policy, model.jumps(), cfg, model.x0) for n in n_values]
    bcfg = replace(cfg, dt=min(bundle_dt, cfg.T), seed=cfg.seed + 1)
    bundle = simulate_bundle(drift, policy, model.jumps(), bcfg, model.x0)
    derr = [drift_error_integral(drift.b2, n, bundle) for n in n_values]
    return MollifyReport(list(n_values), coupling, derr)


# ---------------------------------------------------------------------------
# maximum principle


@dataclass
class SmpReport:
    min_product: float
    violation_fraction: float
    n_products: int
    sign_relation_frequency: float
    sign_relation_n: int
    sign_relation_unresolved: int
    raw_sign_frequency: float
    per_time: list = field(default_factory=list)
    probes: list = field(default_factory=list)

    def passed(self, max_violation: float = 0.05, min_sign: float = 0.9) -> bool:
        return self.violation_fraction <= max_violation and self.sign_relation_frequency >= min_sign

    def to_dict(self) -> dict:
        return {
            "min_product": self.min_product,
            "violation_fraction": self.violation_fraction,
            "n_products": self.n_products,
            "sign_relation_frequency": self.sign_relation_frequency,
            "sign_relation_n": self.sign_relation_n,
            "sign_relation_unresolved": self.sign_relation_unresolved,
            "raw_sign_frequency": self.raw_sign_frequency,
            "adjoint_probe_table": self.probes,
        }


def smp_check(model: SurplusModel, T: float = 2.0, dt: float = 0.01, outer_paths: int = 200,
              inner_paths: int = 500, times: Optional[Sequence[float]] = None, band: float = 0.05,
              seed: int = 0, z: float = 3.0, resolve_z: float = 2.0, grid_A=None,
              regression_paths: int = 0, n_probes: int = 20) -> SmpReport:
    """Necessary-condition scan and sign relation under ``a_max sgn(x)``.

    Outer paths follow the sign policy; the adjoint at each outer state is a
    closed-loop nested Monte Carlo estimate with ``g(x) = -x²``.
    """
    policy = policy_library(model.a_max)[0]
    drift, jumps = model.drift(), model.jumps()
    obj = Objective.neg_square()
    ctx = HamiltonianCtx.build(drift, jumps, obj)
    grid_A = np.linspace(-model.a_max, model.a_max, 9) if grid_A is None else np.asarray(grid_A)
    times = np.round(np.arange(0.2, T - 1e-9, 0.2), 10) if times is None else np.asarray(times, dtype=float)

    outer = simulate_bundle(drift, policy, jumps, model.sim_config(T, dt, outer_paths, seed), model.x0)
    U = outer.uniform_nodes()
    inner_cfg = model.sim_config(T, dt, inner_paths, seed + 1)
    X, P, S, A, TT, per_time = [], [], [], [], [], []
    for t in times:
        k = int(np.argmin(np.abs(outer.grid - t)))
        xs = outer.x_post[U[:, k]]
        p, se = adjoint_nested_mc_batch(float(outer.grid[k]), xs, policy, drift, jumps, inner_cfg, obj,
                                        closed_loop=True, seed=seed + 1000 + k)
        a = policy(outer.grid[k], xs)
        X.append(xs), P.append(p), S.append(se), A.append(a), TT.append(np.full(xs.size, outer.grid[k]))
        rep_t = necessary_condition_scan(TT[-1], xs, a, p, ctx, grid_A, adjoint_se=se, z=z, band=band)
        sr_t = sign_relation_check(xs, p, band, se, resolve_z)
        per_time.append({"t": float(outer.grid[k]), "n": int(xs.size), "mean_abs_p": float(np.mean(np.abs(p))),
                         "mean_se": float(np.mean(se)), "violation_fraction": rep_t.violation_fraction,
                         "sign_frequency": sr_t.frequency, "sign_n": sr_t.n,
                         "raw_sign_frequency": sign_relation_check(xs, p, band).frequency})
    X, P, S, A, TT = map(np.concatenate, (X, P, S, A, TT))
    rep = necessary_condition_scan(TT, X, A, P, ctx, grid_A, adjoint_se=S, z=z, band=band)
    sr = sign_relation_check(X, P, band, S, resolve_z)
    raw = sign_relation_check(X, P, band)

    probes = []
    if regression_paths > 0:
        probes = adjoint_probe_table(model, T, dt, regression_paths, inner_paths, seed + 7, n_probes)
    return SmpReport(rep.min_product, rep.violation_fraction, rep.n_checked, sr.frequency, sr.n, sr.n_unresolved,
                     raw.frequency, per_time, probes)


def adjoint_probe_table(model: SurplusModel, T: float, dt: float, n_paths: int, inner_paths: int, seed: int,
                        n_probes: int = 20, degree: int = 3) -> list:
    """Closed-loop regression adjoint against nested Monte Carlo at probe states."""
    policy = policy_library(model.a_max)[0]
    drift, jumps = model.drift(), model.jumps()
    cl = closed_loop_drift(drift, policy)
    obj = Objective.neg_square()
    bundle = simulate_bundle(cl, zero_policy(), jumps, model.sim_config(T, dt, n_paths, seed), model.x0)
    gen = np.random.default_rng(seed)
    ts = np.sort(gen.choice(np.round(np.arange(0.5, T - 1e-9, 0.25), 10), size=n_probes))
    rows = []
    reg = adjoint_regression(bundle, cl, obj, degree, times=np.unique(ts))
    inner_cfg = model.sim_config(T, dt, inner_paths, seed + 1)
    for i, t in enumerate(ts):
        x = float(gen.uniform(-0.6, 0.6))
        p, se = adjoint_nested_mc_batch(float(t), [x], policy, drift, jumps, inner_cfg, obj, closed_loop=True,
                                        seed=seed + 100 + i)
        rows.append({"t": float(t), "x": x, "nested": float(p[0]), "nested_se": float(se[0]),
                     "regression": float(reg(t, x)), "regression_se": float(reg.std_err(t, x))})
    return rows
