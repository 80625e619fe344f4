"""Insurance surplus control model and the parameter sweeps built on it.

The reserve follows

    dX = -(δ X + α - β sgn(X) 1{|X| > H}) dt - σ dB - jumps,

so the control enters the drift as ``b1(x, a) = -a``. Under the diffusion
approximation the claims are replaced by a second Brownian term with
volatility ``sqrt(λ E[ξ²])``, merged with ``σ`` into one driver.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .drift import DriftDecomposition, PiecewiseLipschitzFn
from .jumps import NO_JUMPS, JumpModel, normal_jumps
from .policy import ControlPolicy
from .simulate import SimConfig, simulate_bundle
from .stats import MonteCarloEstimate


def sigma_bar(lam: float, mu: float, tau: float) -> float:
    """Volatility matching the claims' second moment: ``sqrt(λ (τ² + μ²))``."""
    if lam < 0 or tau < 0:
        raise ValueError("need lam >= 0 and tau >= 0")
    return float(np.sqrt(lam * (tau * tau + mu * mu)))


def _neg(z):
    return -np.asarray(z, dtype=float)


@dataclass(frozen=True)
class SurplusModel:
    delta: float = 0.05
    beta: float = 1.0
    H: float = 1.0
    sigma: float = 0.2
    lam: float = 2.0
    mu: float = 0.0
    tau: float = 0.5
    a_max: float = 2.0
    x0: float = 0.0
    diffusion_approx: bool = True

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta >= 0")
        if not self.H > 0:
            raise ValueError("H > 0")
        if not self.a_max > 0:
            raise ValueError("a_max > 0")
        if self.lam < 0:
            raise ValueError("lam >= 0")
        if self.tau < 0:
            raise ValueError("tau >= 0")
        if self.sigma < 0:
            raise ValueError("sigma >= 0")

    @property
    def sigma_bar(self) -> float:
        return sigma_bar(self.lam, self.mu, self.tau)

    @property
    def sim_sigma(self) -> float:
        """Volatility of the single Brownian driver used in simulation."""
        if self.diffusion_approx:
            return float(np.sqrt(self.sigma ** 2 + self.sigma_bar ** 2))
        return float(self.sigma)

    @property
    def total_variance(self) -> float:
        """Instantaneous variance rate, ``σ² + λ(τ² + μ²)`` in both variants."""
        return self.sigma ** 2 + self.lam * (self.tau ** 2 + self.mu ** 2)

    def jumps(self) -> JumpModel:
        if self.diffusion_approx or self.lam == 0:
            return NO_JUMPS
        return normal_jumps(self.lam, self.mu, self.tau, gamma=_neg)

    def drift(self) -> DriftDecomposition:
        return build_surplus_drift(self)

    def sim_config(self, T: float, dt: float, n_paths: int = 1, seed: int = 0, scheme: str = "direct_euler") -> SimConfig:
        return SimConfig(T=T, dt=dt, n_paths=n_paths, seed=seed, sigma=self.sim_sigma, scheme=scheme)


def _zeros(x, a):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(a)).shape)


def build_surplus_drift(model: SurplusModel) -> DriftDecomposition:
    """``b1 = -a``, ``b2 = β sgn(x) 1{|x| > H}``, ``b3 = -δ x``.

    At ``x = ±H`` the right-limit convention of piecewise functions applies.
    """
    d, beta, H = float(model.delta), float(model.beta), float(model.H)
    b2 = PiecewiseLipschitzFn.zero() if beta == 0 else PiecewiseLipschitzFn.step((-H, H), (-beta, 0.0, beta))
    return DriftDecomposition(
        b1=lambda x, a: -(_zeros(x, a) + a),
        db1_dx=_zeros,
        db1_da=lambda x, a: _zeros(x, a) - 1.0,
        b2=b2,
        b3=lambda x: -d * np.asarray(x, dtype=float),
        db3_dx=lambda x: np.full(np.shape(x), -d),
        growth=abs(d),
    )


CONVENTIONS = ("stabilizing", "literal")


def policy_library(a_max: float = 2.0, H_thr: float = 2.0, convention: str = "stabilizing") -> list:
    """The three comparison policies: sign, linear feedback and threshold.

    ``convention="literal"`` takes the linear and threshold rules as written
    for the control variable, ``a = clip(-x)`` and ``a = -1{x > H_thr}``; since
    the drift receives ``-a`` both then push the reserve away from 0.
    ``"stabilizing"`` (default) flips those two signs so that every policy
    pulls towards 0: ``a = clip(x)`` and ``a = 1{x > H_thr}``. The sign rule
    ``a = a_max sgn(x)`` is the same in both. All values lie in
    ``[-a_max, a_max]``.
    """
    if not a_max > 0:
        raise ValueError("a_max > 0")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    s = 1.0 if convention == "stabilizing" else -1.0
    return [
        ControlPolicy.sign(a_max, name="sign"),
        ControlPolicy.linear_feedback(s, -a_max, a_max, name="linear"),
        ControlPolicy.threshold(H_thr, s * 1.0, -a_max, a_max, name="threshold"),
    ]


@dataclass(frozen=True)
class SweepResult:
    axis: str
    points: list = field(default_factory=list)

    def series(self) -> dict:
        """``{policy: [(value, estimate), ...]}`` in sweep order."""
        out: dict = {}
        for v, name, est in self.points:
            out.setdefault(name, []).append((v, est))
        return out

    def estimate(self, value: float, policy: str) -> MonteCarloEstimate:
        for v, name, est in self.points:
            if name == policy and np.isclose(v, value):
                return est
        raise KeyError((value, policy))

    def rows(self):
        for v, name, est in self.points:
            yield {"axis_value": v, "policy": name, "mean": est.mean, "ci95": est.ci95, "n": est.n}


def second_moment(model: SurplusModel, policy, T: float, dt: float, n_paths: int, seed: int,
                  workers=None, scheme: str = "direct_euler") -> MonteCarloEstimate:
    """``E[X_T²]`` from ``n_paths`` terminal states."""
    cfg = model.sim_config(T, min(dt, T), n_paths, seed, scheme)
    b = simulate_bundle(model.drift(), policy, model.jumps(), cfg, model.x0, record="terminal", workers=workers)
    return MonteCarloEstimate.from_samples(b.x_T ** 2)


def sweep_T(model: SurplusModel, policies: Sequence[ControlPolicy], T_list, cfg: SimConfig, workers=None) -> SweepResult:
    """``E[X_T²]`` per horizon and policy, all on the same seed."""
    if len(T_list) == 0:
        raise ValueError("T_list must be non-empty")
    pts = []
    for T in T_list:
        for pol in policies:
            est = second_moment(model, pol, float(T), cfg.dt, cfg.n_paths, cfg.seed, workers, cfg.scheme)
            pts.append((float(T), pol.name, est))
    return SweepResult("T", pts)


def _sweep_param(axis, name, model, policy, values, cfg, T, workers):
    if len(values) == 0:
        raise ValueError(f"{axis} list must be non-empty")
    pts = []
    for v in values:
        m = replace(model, **{name: float(v)})
        pts.append((float(v), policy.name, second_moment(m, policy, T, cfg.dt, cfg.n_paths, cfg.seed, workers,
                                                         cfg.scheme)))
    return SweepResult(axis, pts)


def sweep_lambda(model: SurplusModel, policy: ControlPolicy, lam_list, cfg: SimConfig, T: float = 2.0,
                 workers=None) -> SweepResult:
    return _sweep_param("lambda", "lam", model, policy, lam_list, cfg, T, workers)


def sweep_tau(model: SurplusModel, policy: ControlPolicy, tau_list, cfg: SimConfig, T: float = 2.0,
              workers=None) -> SweepResult:
    return _sweep_param("tau", "tau", model, policy, tau_list, cfg, T, workers)
