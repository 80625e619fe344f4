"""Change of variable that removes drift discontinuities.

``G(x) = x + sum_k alpha_k phi((x - xi_k)/c) (x - xi_k)|x - xi_k|`` with the
bump ``phi(u) = (1 - u^2)^3`` on ``|u| <= 1``. With ``alpha_k`` equal to half the
drift's downward jump at ``xi_k`` (divided by ``sigma^2`` when requested), the
drift of ``Y = G(X)`` is continuous at every breakpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NoConvergence, NoValidC, ZeroJump
from .jumps import NO_JUMPS
from .simulate import SimConfig, integrate


def phi_bump(u):
    u = np.asarray(u, dtype=float)
    w = 1.0 - u * u
    return np.where(np.abs(u) <= 1.0, w ** 3, 0.0)


def _phi_d1(u):
    w = 1.0 - u * u
    return np.where(np.abs(u) <= 1.0, -6.0 * u * w * w, 0.0)


def _phi_d2(u):
    w = 1.0 - u * u
    return np.where(np.abs(u) <= 1.0, -6.0 * w * w + 24.0 * u * u * w, 0.0)


# G' - 1 = alpha * c * _bump_slope(u) inside a bump
def _bump_slope(u):
    return _phi_d1(u) * u * np.abs(u) + 2.0 * phi_bump(u) * np.abs(u)


def discontinuity_coefficients(drift, sigma: float = 1.0, tol: float = 0.0):
    """``(xi_k, alpha_k)`` from the one-sided limits of the drift's b2 part.

    ``alpha_k = (b(xi_k-) - b(xi_k+)) / (2 sigma^2)``; the default ``sigma=1``
    gives the plain half-jump. Raises ``ZeroJump`` listing removable breakpoints.
    """
    b2 = getattr(drift, "b2", drift)
    xi = np.asarray(b2.breakpoints, dtype=float)
    alpha = (np.asarray(b2.left_limits) - np.asarray(b2.right_limits)) / (2.0 * sigma * sigma)
    zero = np.abs(alpha) <= tol
    if np.any(zero):
        raise ZeroJump(f"removable breakpoints at {xi[zero].tolist()}", xi[zero])
    return list(zip(xi.tolist(), alpha.tolist()))


@dataclass(frozen=True)
class TransformG:
    xi: tuple
    alpha: tuple
    c: float
    g_lower: float = 1.0
    g_upper: float = 1.0

    @classmethod
    def identity(cls) -> "TransformG":
        return cls((), (), 1.0)

    @classmethod
    def from_coefficients(cls, coeffs, c: Optional[float] = None) -> "TransformG":
        if not coeffs:
            return cls.identity()
        xi = tuple(float(x) for x, _ in coeffs)
        alpha = tuple(float(a) for _, a in coeffs)
        c = select_c(coeffs) if c is None else float(c)
        lo, hi = _derivative_bounds(alpha, c)
        return cls(xi, alpha, c, lo, hi)

    @classmethod
    def from_drift(cls, drift, sigma: float = 1.0) -> "TransformG":
        b2 = drift.b2
        if not getattr(b2, "breakpoints", ()):
            return cls.identity()
        jumps = np.asarray(b2.left_limits) - np.asarray(b2.right_limits)
        keep = jumps != 0
        coeffs = [(x, j / (2.0 * sigma * sigma)) for x, j, k in zip(b2.breakpoints, jumps, keep) if k]
        return cls.from_coefficients(coeffs)

    @property
    def m(self) -> int:
        return len(self.xi)

    @property
    def is_identity(self) -> bool:
        return self.m == 0

    def _terms(self, x):
        x = np.asarray(x, dtype=float)
        for xk, ak in zip(self.xi, self.alpha):
            d = x - xk
            yield ak, d, d / self.c

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        for ak, d, u in self._terms(x):
            out = out + ak * phi_bump(u) * d * np.abs(d)
        return out

    def prime(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        for ak, d, u in self._terms(x):
            out = out + ak * (_phi_d1(u) / self.c * d * np.abs(d) + 2.0 * phi_bump(u) * np.abs(d))
        return out

    def second(self, x):
        """G''; at a breakpoint the right-hand value is used."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for ak, d, u in self._terms(x):
            sgn = np.where(d >= 0, 1.0, -1.0)
            out = out + ak * (_phi_d2(u) / self.c ** 2 * d * np.abs(d)
                              + 4.0 * _phi_d1(u) / self.c * np.abs(d)
                              + 2.0 * phi_bump(u) * sgn)
        return out

    def inverse(self, y, tol: float = 1e-12, max_iter: int = 200):
        """Solve ``G(x) = y`` by bracketed Newton with bisection fallback."""
        y = np.asarray(y, dtype=float)
        if self.is_identity:
            return y.copy()
        if y.ndim != 1:
            return self.inverse(y.ravel(), tol, max_iter).reshape(y.shape)
        delta = max(abs(a) for a in self.alpha) * self.c ** 2 + 1.0
        lo, hi = y - delta, y + delta
        x = y.copy()
        tol_arr = np.maximum(tol, 4.0 * np.finfo(float).eps * np.abs(y))
        active = np.ones(y.shape, dtype=bool)
        for _ in range(max_iter):
            r = self(x[active]) - y[active]
            done = np.abs(r) <= tol_arr[active]
            idx = np.flatnonzero(active)
            active[idx[done]] = False
            if not active.any():
                return x
            idx, r = idx[~done], r[~done]
            xa = x[idx]
            lo[idx] = np.where(r < 0, xa, lo[idx])
            hi[idx] = np.where(r > 0, xa, hi[idx])
            step = xa - r / self.prime(xa)
            bad = ~((step > lo[idx]) & (step < hi[idx]))
            step[bad] = 0.5 * (lo[idx][bad] + hi[idx][bad])
            stalled = step == xa
            if np.any(stalled):
                active[idx[stalled]] = False
            x[idx] = step
        if active.any():
            raise NoConvergence(f"G inverse did not converge for {int(active.sum())} values")
        return x


def _derivative_bounds(alpha, c, n: int = 20001):
    u = np.linspace(-1.0, 1.0, n)
    prof = _bump_slope(u)
    lo = 1.0 + min(min(a * c * prof.min(), a * c * prof.max()) for a in alpha)
    hi = 1.0 + max(max(a * c * prof.min(), a * c * prof.max()) for a in alpha)
    return float(lo), float(hi)


def select_c(coeffs, safety: float = 0.9, max_halvings: int = 20, n_check: int = 4001) -> float:
    """Bump radius: ``safety * min(1/(6|alpha_k|), min gap / 2)``, halved until
    ``G' > 0`` on a dense grid around every breakpoint."""
    if not coeffs:
        raise ValueError("no discontinuities: use the identity transform")
    xi = np.array([x for x, _ in coeffs], dtype=float)
    alpha = np.array([a for _, a in coeffs], dtype=float)
    if np.any(alpha == 0):
        raise ZeroJump("alpha_k must be non-zero", xi[alpha == 0])
    gap = np.min(np.diff(xi)) / 2.0 if xi.size > 1 else np.inf
    c = safety * min(np.min(1.0 / (6.0 * np.abs(alpha))), gap)
    for _ in range(max_halvings + 1):
        G = TransformG(tuple(xi), tuple(alpha), c)
        grid = (xi[:, None] + c * np.linspace(-1.0, 1.0, n_check)).ravel()
        if np.min(G.prime(grid)) > 0:
            return float(c)
        c *= 0.5
    raise NoValidC("G' > 0 could not be verified after repeated halving")


@dataclass(frozen=True)
class TransformedCoefficients:
    G: TransformG
    bar_b: Callable
    bar_sigma: Callable
    bar_gamma: Callable
    bar_b_n: Optional[Callable] = None


def transformed_coefficients(G: TransformG, drift, sigma: float, jumps=NO_JUMPS, policy=None,
                             mollified_drift=None) -> TransformedCoefficients:
    """Coefficients of ``Y = G(X)`` from Itô's formula.

    Drift ``G'(x) b(x, a) + sigma^2 G''(x) / 2``, diffusion ``sigma G'(x)`` and
    jump increment ``G(x + gamma(z)) - y`` with ``x = G^{-1}(y)``; ``a`` is the
    policy evaluated in the original coordinates (0 when no policy is given).
    """
    jumps = jumps or NO_JUMPS

    def control(t, x):
        return policy(t, x) if policy is not None else np.zeros_like(x)

    def make_bar(d):
        def bar(y, t=0.0):
            x = G.inverse(y)
            return G.prime(x) * d(x, control(t, x)) + 0.5 * sigma ** 2 * G.second(x)
        return bar

    def bar_sigma(y):
        return sigma * G.prime(G.inverse(y))

    def bar_gamma(y, z):
        return G(G.inverse(y) + jumps.gamma(z)) - np.asarray(y, dtype=float)

    bar_b_n = make_bar(mollified_drift) if mollified_drift is not None else None
    return TransformedCoefficients(G, make_bar(drift), bar_sigma, bar_gamma, bar_b_n)


def simulate_transformed_bundle(drift, policy, jumps, cfg: SimConfig, x0, *, t0=0.0, path_ids=None,
                                record="full", workers=None, seed=None, G: Optional[TransformG] = None,
                                sigma_scaled: bool = False):
    """Euler on ``Y = G(X)`` from ``G(x0)``, mapped back through ``G^{-1}``.

    Noise records are kept; with no breakpoints this is exactly the direct
    scheme on the same substreams.
    """
    from .simulate import _direct_fns

    jumps = jumps or NO_JUMPS
    seed = cfg.seed if seed is None else seed
    if path_ids is None:
        path_ids = np.arange(cfg.n_paths)
    if G is None:
        G = TransformG.from_drift(drift, cfg.sigma if sigma_scaled else 1.0)
    if G.is_identity:
        fns = _direct_fns(drift, policy, jumps, cfg.sigma)
        return integrate(x0, t0, cfg.T, cfg.dt, seed, path_ids, *fns, jumps=jumps, record=record,
                         workers=workers, sigma_label=cfg.sigma)
    sigma = cfg.sigma

    def drift_fn(t, y, pos):
        x = G.inverse(y)
        a = policy(t, x, pos)
        return G.prime(x) * drift(x, a) + 0.5 * sigma ** 2 * G.second(x), a

    def diff_fn(y):
        return sigma * G.prime(G.inverse(y))

    def jump_fn(y, z):
        return G(G.inverse(y) + jumps.gamma(z))

    y0 = G(np.asarray(x0, dtype=float))
    bundle = integrate(y0, t0, cfg.T, cfg.dt, seed, path_ids, drift_fn, diff_fn, jump_fn, jumps=jumps,
                       record=record, workers=workers, sigma_label=sigma)
    bundle.x0 = G.inverse(bundle.x0)
    bundle.x_T = G.inverse(bundle.x_T)
    bundle.jump_post = G.inverse(bundle.jump_post)
    if bundle.full:
        bundle.x = G.inverse(bundle.x)
    return bundle


def simulate_transformed(drift, policy, jumps, cfg: SimConfig, x0: float, stream=None, **kw):
    from .rng import Stream

    stream = stream or Stream(cfg.seed, 0)
    return simulate_transformed_bundle(drift, policy, jumps, cfg, x0, path_ids=[stream.index],
                                       seed=stream.seed, **kw).path(0)


def lipschitz_estimate(fn, lo: float = -5.0, hi: float = 5.0, n: int = 10_000) -> float:
    """Largest difference quotient of ``fn`` on a uniform grid."""
    x = np.linspace(lo, hi, n)
    v = np.asarray(fn(x), dtype=float)
    return float(np.max(np.abs(np.diff(v)) / np.diff(x)))
