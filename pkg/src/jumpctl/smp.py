"""First variation, adjoint process, Hamiltonian and optimality checks.

The first variation of the flow is evaluated with the explicit exponential
formula. Its exponent over ``[t, s]`` is

    ∫ (∂x b1 + ∂x b3) du + (2/σ²) [ b̃2(X_s) - b̃2(X_t) - ∫ b2 (b1 + b2 + b3) du
                                     - σ ∫ b2 dB - Σ (b̃2(X_u- + γ) - b̃2(X_u-)) ]

where ``b̃2`` is the primitive of ``b2`` based at 0 and the sum runs over jumps
in ``(t, s]``. Time integrals are left Riemann sums and the stochastic integral
an Itô left-point sum on the recorded increments. Along one path the exponent
is a difference ``Ψ_s - Ψ_t`` of a node potential, so ``Φ`` is a cocycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng as _rng
from .drift import DriftDecomposition, Piece, PiecewiseLipschitzFn
from .errors import EmptyBundle, MissingNoise, RankDeficient
from .jumps import NO_JUMPS
from .policy import ControlPolicy, ReplayControl
from .simulate import PathBundle, SamplePath, SimConfig, simulate_bundle
from .stats import MonteCarloEstimate

COMPONENTS = ("db1", "db3", "primitive", "b2_b1", "b2_b2", "b2_b3", "b2_dB", "jumps")


def antiderivative_b2(b2, x):
    """``∫_0^x b2(y) dy``."""
    return b2.primitive(np.asarray(x, dtype=float))


def closed_loop_drift(drift: DriftDecomposition, policy: ControlPolicy) -> DriftDecomposition:
    """Fold a feedback policy into the piecewise part: ``b2 <- b1(x, α(x)) + b2``.

    The policy must describe its clipped feedback map as a piecewise Lipschitz
    function. The result has ``b1 ≡ 0`` and simulates the same dynamics.
    """
    fb = policy.feedback
    if fb is None:
        raise ValueError(f"policy {policy.name!r} has no piecewise feedback description")
    b2 = drift.b2
    xi = np.union1d(np.asarray(fb.breakpoints, dtype=float), np.asarray(b2.breakpoints, dtype=float))
    if xi.size:
        reps = np.concatenate([[xi[0] - 1.0], 0.5 * (xi[:-1] + xi[1:]), [xi[-1] + 1.0]])
    else:
        reps = np.array([0.0])
    b1 = drift.b1
    pieces = []
    for r in reps:
        pf = fb.pieces[int(fb.piece_index(r))] if fb.m else fb.pieces[0]
        pb = b2.pieces[int(b2.piece_index(r))] if b2.m else b2.pieces[0]
        pieces.append(Piece(lambda x, pf=pf, pb=pb: b1(np.asarray(x, dtype=float), pf(x)) + pb(x),
                            pb.lipschitz + pf.lipschitz * _sup_abs(drift.db1_da, reps)))
    bound = b2.global_bound + _sup_abs(b1, reps, policy.lo, policy.hi)
    folded = PiecewiseLipschitzFn(tuple(xi), tuple(pieces), bound)
    return DriftDecomposition(b2=folded, b3=drift.b3, db3_dx=drift.db3_dx, growth=drift.growth)


def _sup_abs(fn, reps, lo=-1.0, hi=1.0):
    xs = np.linspace(min(reps.min(), -10.0), max(reps.max(), 10.0), 201)
    X, A = np.meshgrid(xs, np.linspace(lo, hi, 21))
    return float(np.max(np.abs(fn(X, A))))


def zero_policy() -> ControlPolicy:
    return ControlPolicy.constant(0.0, 0.0, 0.0, "zero")


# ---------------------------------------------------------------------------
# first variation


def _node_terms(drift: DriftDecomposition, sigma: float, t, x, xp, a, dB, h, jump_pos, jump_post):
    """Per-node exponent increments, one array per component.

    Step terms sit on the node that starts the sub-step; jump terms on the
    jump node. ``primitive`` holds ``(2/σ²) b̃2`` at the post-jump state.
    """
    a = np.where(np.isnan(a), 0.0, a)
    dB = np.where(np.isnan(dB), 0.0, dB)
    zeros = np.zeros_like(xp)
    out = {
        "db1": drift.db1_dx(xp, a) * h,
        "db3": drift.db3_dx(xp) * h,
    }
    if not drift.has_b2:
        for k in COMPONENTS[2:]:
            out[k] = zeros
        return out
    if not sigma > 0:
        raise ValueError("the explicit first variation needs sigma > 0 when b2 is non-zero")
    k2 = 2.0 / sigma ** 2
    b2 = drift.b2(xp)
    out["primitive"] = k2 * drift.b2.primitive(xp)
    out["b2_b1"] = -k2 * b2 * drift.b1(xp, a) * h
    out["b2_b2"] = -k2 * b2 * b2 * h
    out["b2_b3"] = -k2 * b2 * drift.b3(xp) * h
    out["b2_dB"] = -k2 * sigma * b2 * dB
    jm = np.zeros_like(xp)
    if jump_pos.size:
        jm[jump_pos] = -k2 * (drift.b2.primitive(jump_post) - drift.b2.primitive(x[jump_pos]))
    out["jumps"] = jm
    return out


def _segment_cumsum(v, offsets, inclusive):
    """Per-path cumulative sums of node values (exclusive: sum over earlier nodes)."""
    cs = np.cumsum(v)
    start = np.repeat(cs[offsets[:-1]] - v[offsets[:-1]], np.diff(offsets))
    cs = cs - start
    return cs if inclusive else cs - v


@dataclass
class FirstVariation:
    """``Φ_{t,s}`` along one path, from per-node cumulative exponent parts."""

    times: np.ndarray
    cumulative: dict = field(repr=False)

    def node(self, t: float) -> int:
        return int(np.searchsorted(self.times, t, side="right") - 1)

    def components(self, t: float, s: float) -> dict:
        i, j = self.node(t), self.node(s)
        if j < i:
            raise ValueError("need t <= s")
        return {k: float(v[j] - v[i]) for k, v in self.cumulative.items()}

    def log_phi(self, t: float, s: float) -> float:
        return float(sum(self.components(t, s).values()))

    def phi(self, t: float, s: float) -> float:
        return float(np.exp(self.log_phi(t, s)))

    def sample(self, t: float, s: float) -> "FirstVariationSample":
        comps = self.components(t, s)
        return FirstVariationSample(t, s, float(np.exp(sum(comps.values()))), comps)

    @property
    def log_phi_nodes(self) -> np.ndarray:
        """``log Φ_{t_0, t_j}`` for every node ``j``."""
        return sum(self.cumulative.values())


@dataclass(frozen=True)
class FirstVariationSample:
    t: float
    s: float
    phi: float
    components: dict


def _cumulative(terms, offsets):
    cum = {}
    for k, v in terms.items():
        if k == "primitive":
            cum[k] = v
        elif k == "jumps":
            cum[k] = _segment_cumsum(v, offsets, inclusive=True)
        else:
            cum[k] = _segment_cumsum(v, offsets, inclusive=False)
    return cum


def first_variation(path: SamplePath, drift: DriftDecomposition, policy: Optional[ControlPolicy] = None,
                    sigma: Optional[float] = None, closed_loop: bool = False) -> FirstVariation:
    """Explicit first variation along a recorded path.

    Open loop (default) keeps the recorded controls fixed. With
    ``closed_loop=True`` the feedback ``policy`` is folded into ``b2``.
    """
    if path.brownian_increments is None or len(path.brownian_increments) != len(path.times) - 1:
        raise MissingNoise("path carries no Brownian increments")
    sigma = path.sigma if sigma is None else sigma
    if closed_loop:
        drift = closed_loop_drift(drift, policy)
    t = path.times
    x = path.states
    xp = path.post_states
    a = np.append(path.control_values, np.nan)
    dB = np.append(path.brownian_increments, np.nan)
    h = np.append(np.diff(t), 0.0)
    jp = np.asarray(path.jump_nodes, dtype=np.int64)
    terms = _node_terms(drift, sigma, t, x, xp, a, dB, h, jp, xp[jp] if jp.size else np.empty(0))
    offsets = np.array([0, t.size])
    return FirstVariation(t, _cumulative(terms, offsets))


def variation_potential(bundle: PathBundle, drift: DriftDecomposition, sigma: Optional[float] = None) -> np.ndarray:
    """Node potential ``Ψ`` with ``log Φ_{t_i, t_j} = Ψ_j - Ψ_i`` on each path."""
    bundle._need_full()
    if bundle.dB is None:
        raise MissingNoise("bundle carries no Brownian increments")
    sigma = bundle.sigma if sigma is None else sigma
    terms = _node_terms(drift, sigma, bundle.t, bundle.x, bundle.x_post, bundle.a, bundle.dB, bundle.h,
                        bundle.jump_pos, bundle.jump_post)
    # combine before the cumulative sums to keep memory flat on large bundles
    psi = terms.pop("primitive")
    jumps = terms.pop("jumps")
    steps = terms.popitem()[1].copy()
    while terms:
        steps += terms.popitem()[1]
    psi = psi + _segment_cumsum(steps, bundle.offsets, inclusive=False)
    del steps
    psi += _segment_cumsum(jumps, bundle.offsets, inclusive=True)
    return psi


def phi_terminal(bundle: PathBundle, drift: DriftDecomposition, sigma: Optional[float] = None) -> np.ndarray:
    """``Φ_{t_0, T}`` per path."""
    psi = variation_potential(bundle, drift, sigma)
    return np.exp(psi[bundle.last_nodes] - psi[bundle.offsets[:-1]])


def first_variation_fd_bundle(drift, policy, jumps, cfg: SimConfig, x0, h: float = 1e-4, *, path_ids=None,
                              seed=None, closed_loop: bool = False):
    """Common-noise difference quotients ``(X^{x0+h}_T - X^{x0}_T) / h``.

    Open loop replays the base run's controls in the perturbed run. Returns
    the quotients and the base bundle.
    """
    base = simulate_bundle(drift, policy, jumps, cfg, x0, path_ids=path_ids, seed=seed)
    other = policy if closed_loop else ReplayControl(base.a)
    bumped = simulate_bundle(drift, other, jumps, cfg, np.asarray(x0, dtype=float) + h, path_ids=path_ids,
                             seed=seed)
    return (bumped.x_T - base.x_T) / h, base


def first_variation_fd(drift, policy, jumps, cfg: SimConfig, x0: float, h: float = 1e-4, stream=None,
                       closed_loop: bool = False) -> float:
    stream = stream or _rng.Stream(cfg.seed, 0)
    fd, _ = first_variation_fd_bundle(drift, policy, jumps, cfg, x0, h, path_ids=[stream.index],
                                      seed=stream.seed, closed_loop=closed_loop)
    return float(fd[0])


def moment_monitor(phi_samples, p: float) -> MonteCarloEstimate:
    """Empirical ``E|Φ|^p``."""
    if p not in (1, 2, 4):
        raise ValueError("p must be 1, 2 or 4")
    phi = np.asarray(phi_samples, dtype=float)
    if phi.size == 0:
        raise EmptyBundle("no first-variation samples")
    if not np.all(np.isfinite(phi)):
        raise FloatingPointError("non-finite first variation")
    return MonteCarloEstimate.from_samples(np.abs(phi) ** p)


# ---------------------------------------------------------------------------
# Hamiltonian and objective


def _zero_txa(t, x, a):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(a)).shape)


@dataclass(frozen=True)
class Objective:
    """Reward ``E[∫ f(t, X, a) dt + g(X_T)]`` with the derivatives the adjoint needs."""

    g: Callable
    dg: Callable
    f: Optional[Callable] = None
    df_dx: Callable = _zero_txa
    df_da: Callable = _zero_txa

    @property
    def has_running(self) -> bool:
        return self.f is not None

    @classmethod
    def terminal(cls, g: Callable, dg: Callable) -> "Objective":
        return cls(g, dg)

    @classmethod
    def neg_square(cls) -> "Objective":
        """``g(x) = -x^2``: minimizing the second moment, written as a maximization."""
        return cls(lambda x: -np.asarray(x) ** 2, lambda x: -2.0 * np.asarray(x))


@dataclass(frozen=True)
class HamiltonianCtx:
    f: Callable
    drift: DriftDecomposition
    jump_compensator: float = 0.0
    df_da: Callable = _zero_txa

    def __post_init__(self):
        if not np.isfinite(self.jump_compensator):
            raise ValueError("jump compensator must be finite")

    @classmethod
    def build(cls, drift, jumps=NO_JUMPS, objective: Optional[Objective] = None) -> "HamiltonianCtx":
        f = objective.f if objective is not None and objective.f is not None else _zero_txa
        df_da = objective.df_da if objective is not None else _zero_txa
        return cls(f, drift, (jumps or NO_JUMPS).compensator, df_da)


def hamiltonian(ctx: HamiltonianCtx, t, x, p, a):
    """``H = f(t, x, a) + (b(x, a) + ∫γ dν) p``."""
    return ctx.f(t, x, a) + (ctx.drift(x, a) + ctx.jump_compensator) * p


def hamiltonian_da(ctx: HamiltonianCtx, t, x, p, a):
    """``∂a H = ∂a f + ∂a b1 p``; b2 and b3 do not depend on the control."""
    return ctx.df_da(t, x, a) + ctx.drift.db1_da(np.asarray(x, dtype=float), a) * p


# ---------------------------------------------------------------------------
# adjoint


@dataclass(frozen=True)
class AdjointEstimate:
    t: float
    x: float
    p: float
    std_err: float
    method: str
    n: int = 0


def _pathwise_adjoint(bundle: PathBundle, drift, objective: Objective, psi: np.ndarray) -> np.ndarray:
    """``Φ_{t0,T} ∂g(X_T) + Σ Φ_{t0,s} ∂x f h`` per path."""
    first = bundle.offsets[:-1]
    base = psi[first]
    val = np.exp(psi[bundle.last_nodes] - base) * objective.dg(bundle.x_T)
    if objective.has_running:
        h = bundle.h
        a = np.where(np.isnan(bundle.a), 0.0, bundle.a)
        w = np.exp(psi - np.repeat(base, np.diff(bundle.offsets)))
        val = val + bundle.reduce_paths(w * objective.df_dx(bundle.t, bundle.x_post, a) * h)
    return val


def adjoint_nested_mc_batch(t: float, xs, policy, drift, jumps, cfg_inner: SimConfig, objective: Objective, *,
                            closed_loop: bool = False, seed: Optional[int] = None, max_paths: int = 20_000):
    """Nested Monte Carlo adjoint at several states sharing one start time.

    Each state gets ``cfg_inner.n_paths`` inner paths started at ``(t, x)``.
    Returns arrays ``(p, std_err)``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    n_in = cfg_inner.n_paths
    seed = cfg_inner.seed if seed is None else seed
    sim_drift = closed_loop_drift(drift, policy) if closed_loop else drift
    sim_policy = zero_policy() if closed_loop else policy
    per = max(1, max_paths // n_in)
    vals = np.empty((xs.size, n_in))
    for lo in range(0, xs.size, per):
        hi = min(lo + per, xs.size)
        ids = np.arange(lo * n_in, hi * n_in)
        b = simulate_bundle(sim_drift, sim_policy, jumps, cfg_inner, np.repeat(xs[lo:hi], n_in), t0=t,
                            path_ids=ids, seed=seed)
        psi = variation_potential(b, sim_drift)
        vals[lo:hi] = _pathwise_adjoint(b, sim_drift, objective, psi).reshape(hi - lo, n_in)
    se = vals.std(axis=1, ddof=1) / np.sqrt(n_in) if n_in > 1 else np.zeros(xs.size)
    return vals.mean(axis=1), se


def adjoint_nested_mc(t: float, x: float, policy, drift, jumps, cfg_inner: SimConfig, objective: Objective,
                      closed_loop: bool = False, seed: Optional[int] = None) -> AdjointEstimate:
    """``P_t = E[Φ_{t,T} ∂g(X_T) + ∫ Φ_{t,s} ∂x f ds | X_t = x]`` by inner simulation."""
    p, se = adjoint_nested_mc_batch(t, [x], policy, drift, jumps, cfg_inner, objective,
                                    closed_loop=closed_loop, seed=seed)
    return AdjointEstimate(float(t), float(x), float(p[0]), float(se[0]), "nested_mc", cfg_inner.n_paths)


@dataclass(frozen=True)
class _SliceFit:
    t: float
    center: float
    scale: float
    coef: np.ndarray
    cov: np.ndarray
    r2: float


@dataclass(frozen=True)
class RegressionAdjoint:
    """Per-time-slice polynomial fits of the pathwise adjoint integrand."""

    slices: tuple

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.slices])

    def _slice(self, t: float) -> _SliceFit:
        return self.slices[int(np.argmin(np.abs(self.times - t)))]

    def _design(self, s: _SliceFit, x):
        z = (np.asarray(x, dtype=float) - s.center) / s.scale
        return np.vander(np.atleast_1d(z), s.coef.size, increasing=True)

    def __call__(self, t: float, x):
        s = self._slice(t)
        out = self._design(s, x) @ s.coef
        return out if np.ndim(x) else float(out[0])

    def std_err(self, t: float, x):
        s = self._slice(t)
        V = self._design(s, x)
        out = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", V, s.cov, V), 0.0))
        return out if np.ndim(x) else float(out[0])

    def r2(self, t: float) -> float:
        return self._slice(t).r2


COV_TYPES = ("hc3", "ols")


def _fit_slice(t, x, y, degree, cov_type="hc3"):
    n = x.size
    center = float(x.mean())
    scale = float(x.std())
    distinct = np.unique(x).size
    deg = int(min(degree, distinct - 1, max(n - 2, 0)))
    if scale == 0.0 or deg <= 0:
        scale = 1.0 if scale == 0.0 else scale
        deg = 0
    V = np.vander((x - center) / scale, deg + 1, increasing=True)
    if np.linalg.matrix_rank(V) < deg + 1:
        raise RankDeficient(f"design matrix at t={t:g} has rank below {deg + 1}")
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    resid = y - V @ coef
    bread = np.linalg.inv(V.T @ V)
    if cov_type == "ols":
        cov = float(resid @ resid) / max(n - deg - 1, 1) * bread
    else:
        # heteroscedasticity-robust sandwich with leverage correction
        lev = np.einsum("ij,jk,ik->i", V, bread, V)
        w = (resid / np.maximum(1.0 - lev, 1e-12)) ** 2
        cov = bread @ (V.T * w) @ V @ bread
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / tss if tss > 0 else 1.0
    return _SliceFit(float(t), center, scale, coef, cov, r2)


def adjoint_regression(bundle: PathBundle, drift, objective: Objective, basis_degree: int = 3,
                       times=None, sigma: Optional[float] = None, cov_type: str = "hc3") -> RegressionAdjoint:
    """Least-squares projection of the pathwise adjoint integrand on polynomials in ``X_t``.

    ``drift`` must be the drift the bundle was simulated with (closed-loop
    drifts give the closed-loop adjoint). Standard errors use the HC3
    sandwich by default; ``cov_type="ols"`` assumes constant residual variance.
    """
    if cov_type not in COV_TYPES:
        raise ValueError(f"cov_type must be one of {COV_TYPES}")
    if bundle.n_paths == 0:
        raise EmptyBundle("bundle has no paths")
    psi = variation_potential(bundle, drift, sigma)
    U = bundle.uniform_nodes()
    grid = bundle.grid
    ks = np.arange(grid.size) if times is None else np.unique(np.searchsorted(grid, np.asarray(times) - 1e-12))
    psi_T = psi[bundle.last_nodes]
    term = objective.dg(bundle.x_T)
    run_suffix = None
    if objective.has_running:
        h = bundle.h
        a = np.where(np.isnan(bundle.a), 0.0, bundle.a)
        w = np.exp(psi) * objective.df_dx(bundle.t, bundle.x_post, a) * h
        # suffix sums per path: total minus exclusive prefix
        total = bundle.reduce_paths(w)
        prefix = _segment_cumsum(w, bundle.offsets, inclusive=False)
        run_suffix = np.repeat(total, np.diff(bundle.offsets)) - prefix
    xp = bundle.x_post
    fits = []
    for k in ks:
        rows = U[:, k]
        y = np.exp(psi_T - psi[rows]) * term
        if run_suffix is not None:
            y = y + np.exp(-psi[rows]) * run_suffix[rows]
        fits.append(_fit_slice(grid[k], xp[rows], y, basis_degree, cov_type))
    return RegressionAdjoint(tuple(fits))


# ---------------------------------------------------------------------------
# optimality checks


@dataclass(frozen=True)
class NecessaryConditionReport:
    min_product: float
    violation_fraction: float
    n_checked: int
    n_violations: int
    products: np.ndarray = field(repr=False)


def necessary_condition_scan(times, states, controls, adjoint_p, ctx: HamiltonianCtx, grid_A, *,
                             adjoint_se=None, sense: str = "max", z: float = 3.0, eps_tol: float = 0.0,
                             band: float = 0.0) -> NecessaryConditionReport:
    """Check the variational inequality for ``∂a H (β - α̂)`` over ``β`` in ``grid_A``.

    Products are oriented so that a non-negative value means the condition
    holds: for a maximization the sign of ``∂a H (β - α̂)`` is flipped. A point
    is a violation when its product is below ``-(eps_tol + z · se)``, where
    ``se`` propagates the adjoint standard error. States with ``|x| < band``
    are skipped.
    """
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    times, x, a, p = (np.asarray(v, dtype=float).ravel() for v in (times, states, controls, adjoint_p))
    se = np.zeros_like(p) if adjoint_se is None else np.asarray(adjoint_se, dtype=float).ravel()
    keep = np.abs(x) >= band
    times, x, a, p, se = times[keep], x[keep], a[keep], p[keep], se[keep]
    beta = np.asarray(grid_A, dtype=float)
    orient = -1.0 if sense == "max" else 1.0
    dH = hamiltonian_da(ctx, times, x, p, a)
    dH_se = np.abs(ctx.drift.db1_da(x, a)) * se
    diff = beta[None, :] - a[:, None]
    prod = orient * dH[:, None] * diff
    tol = eps_tol + z * dH_se[:, None] * np.abs(diff)
    viol = prod < -tol
    n = int(prod.size)
    return NecessaryConditionReport(float(prod.min()) if n else 0.0, float(viol.mean()) if n else 0.0, n,
                                    int(viol.sum()), prod)


@dataclass(frozen=True)
class SignRelation:
    frequency: float
    n: int
    n_unresolved: int = 0


def sign_relation_check(states, adjoint_p, band_eps: float, adjoint_se=None, z: float = 0.0) -> SignRelation:
    """Frequency of ``sgn(P) = -sgn(X)`` over samples with ``|X| >= band_eps``.

    With ``adjoint_se`` and ``z > 0`` only samples whose estimate is resolved,
    ``|P| > z * se``, are counted; the rest are reported as unresolved.
    """
    x = np.asarray(states, dtype=float).ravel()
    p = np.asarray(adjoint_p, dtype=float).ravel()
    keep = (np.abs(x) >= band_eps) & (x != 0)
    unresolved = 0
    if adjoint_se is not None and z > 0:
        resolved = np.abs(p) > z * np.asarray(adjoint_se, dtype=float).ravel()
        unresolved = int(np.sum(keep & ~resolved))
        keep &= resolved
    n = int(keep.sum())
    if n == 0:
        return SignRelation(float("nan"), 0, unresolved)
    return SignRelation(float(np.mean(np.sign(p[keep]) == -np.sign(x[keep]))), n, unresolved)
