"""Smooth approximations of the discontinuous drift part by convolution."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate

from .drift import PiecewiseLipschitzFn
from .errors import EmptyBundle
from .simulate import SimConfig, simulate_bundle
from .stats import MonteCarloEstimate

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(64)


def _bump(u):
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    w = np.where(inside, 1.0 - u * u, 1.0)
    return np.where(inside, np.exp(-1.0 / w), 0.0)


def _bump_d1(u):
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    w = np.where(inside, 1.0 - u * u, 1.0)
    return np.where(inside, np.exp(-1.0 / w) * (-2.0 * u) / (w * w), 0.0)


_Z = integrate.quad(_bump, -1.0, 1.0, epsabs=1e-14, epsrel=1e-14)[0]
_M2 = integrate.quad(lambda u: u * u * _bump(u), -1.0, 1.0, epsabs=1e-14, epsrel=1e-14)[0] / _Z


@dataclass(frozen=True)
class Mollifier:
    """Normalized kernel ``exp(-1/(1-u^2)) / Z`` on (-1, 1), scaled to width ``1/n``."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n >= 1")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @staticmethod
    def kernel(u):
        return _bump(u) / _Z

    @staticmethod
    def kernel_prime(u):
        return _bump_d1(u) / _Z

    @staticmethod
    def second_moment() -> float:
        return _M2

    def mass(self) -> float:
        """Total kernel mass by 64-node quadrature (should be 1)."""
        return float(np.sum(self.kernel(_NODES) * _WEIGHTS))

    def convolve(self, fn, x, breakpoints=(), kernel=None, block: int = 8192):
        """``∫ fn(x - h u) K(u) du`` with the u-range split where ``x - h u`` hits a breakpoint."""
        kernel = self.kernel if kernel is None else kernel
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi = np.asarray(breakpoints, dtype=float)
        out = np.empty(x.size)
        for lo in range(0, x.size, block):
            out[lo:lo + block] = self._convolve_block(fn, x[lo:lo + block], xi, kernel)
        return out

    def _convolve_block(self, fn, x, xi, kernel):
        h = self.h
        cuts = np.clip((x[:, None] - xi[None, :]) / h, -1.0, 1.0)
        edges = np.sort(np.concatenate([np.full((x.size, 1), -1.0), cuts, np.ones((x.size, 1))], axis=1), axis=1)
        lo, hi = edges[:, :-1], edges[:, 1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        u = mid[..., None] + half[..., None] * _NODES
        vals = np.asarray(fn(x[:, None, None] - h * u), dtype=float) * kernel(u)
        return np.sum(half * np.sum(vals * _WEIGHTS, axis=-1), axis=-1)


@dataclass(frozen=True)
class MollifiedDrift:
    """``b2 * K_h`` with its derivative and its primitive based at 0.

    Off the breakpoint neighbourhoods an affine piece is reproduced exactly,
    since a symmetric kernel preserves affine functions.
    """

    base: PiecewiseLipschitzFn
    mollifier: Mollifier
    sup_bound: float = field(init=False)
    _prim0: float = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sup_bound", float(self.base.global_bound))
        p0 = 0.0 if self.base.m == 0 else float(self._conv_primitive(np.array([0.0]))[0])
        object.__setattr__(self, "_prim0", p0)

    # a mollified drift is continuous: no breakpoints
    breakpoints = property(lambda self: ())
    left_limits = property(lambda self: ())
    right_limits = property(lambda self: ())

    @property
    def n(self) -> int:
        return self.mollifier.n

    @property
    def h(self) -> float:
        return self.mollifier.h

    @property
    def global_bound(self) -> float:
        return self.sup_bound

    @property
    def is_zero(self) -> bool:
        return self.base.is_zero

    @property
    def m(self) -> int:
        return 0

    def _near(self, x):
        """Mask of points whose kernel support meets a breakpoint."""
        if self.base.m == 0:
            return np.zeros(x.shape, dtype=bool)
        xi = np.asarray(self.base.breakpoints)
        return np.min(np.abs(x[..., None] - xi), axis=-1) < self.h

    def _slopes(self, k):
        return np.array([p.slope if p.is_affine else np.nan for p in self.base.pieces])[k]

    def _split(self, x, exact_affine, general):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty_like(flat)
        idx = self.base.piece_index(flat) if self.base.m else np.zeros(flat.shape, dtype=int)
        affine = np.array([p.is_affine for p in self.base.pieces])
        quad = self._near(flat) | ~affine[idx]
        if np.any(~quad):
            out[~quad] = exact_affine(flat[~quad], idx[~quad])
        if np.any(quad):
            out[quad] = general(flat[quad])
        return out.reshape(x.shape)

    def __call__(self, x):
        return self._split(x, lambda v, k: self.base(v),
                           lambda v: self.mollifier.convolve(self.base, v, self.base.breakpoints))

    def derivative(self, x):
        """``(b2 * K_h)'`` as ``(1/h) ∫ b2(x - h u) K'(u) du``."""
        def affine(v, k):
            return self._slopes(k)

        def general(v):
            return self.mollifier.convolve(self.base, v, self.base.breakpoints,
                                           kernel=self.mollifier.kernel_prime) / self.h

        return self._split(x, affine, general)

    def _conv_primitive(self, v):
        return self.mollifier.convolve(self.base.primitive, v, self.base.breakpoints)

    def primitive(self, x):
        """``∫_0^x (b2 * K_h)(y) dy``."""
        def affine(v, k):
            return self.base.primitive(v) + 0.5 * self._slopes(k) * self.h ** 2 * _M2 - self._prim0

        return self._split(x, affine, lambda v: self._conv_primitive(v) - self._prim0)


def mollify(b2: PiecewiseLipschitzFn, n: int) -> MollifiedDrift:
    return MollifiedDrift(b2, Mollifier(int(n)))


def mollified_drift(drift, n: int):
    """Copy of a drift decomposition with ``b2`` replaced by its mollification."""
    return drift.with_b2(mollify(drift.b2, n))


def coupling_error(drift, n: int, policy, jumps, cfg: SimConfig, x0: float = 0.0) -> MonteCarloEstimate:
    """Estimate ``E[sup_t |X_t - X^n_t|^2]`` over the uniform grid.

    Both runs share the seed and therefore every Brownian and jump draw.
    """
    if cfg.scheme != "direct_euler":
        cfg = replace(cfg, scheme="direct_euler")
    n_steps = int(np.ceil(cfg.T / cfg.dt - 1e-9))
    states = np.empty((cfg.n_paths, n_steps + 1))
    states[:, 0] = x0

    def store(k, t, x, rows):
        states[rows, k] = x

    simulate_bundle(drift, policy, jumps, cfg, x0, record="terminal", observer=store)
    sup = np.zeros(cfg.n_paths)

    def compare(k, t, x, rows):
        np.maximum.at(sup, rows, np.abs(x - states[rows, k]))

    simulate_bundle(mollified_drift(drift, n), policy, jumps, cfg, x0, record="terminal", observer=compare)
    return MonteCarloEstimate.from_samples(sup ** 2)


def drift_error_integral(b2: PiecewiseLipschitzFn, n: int, bundle,
                         mollified: Optional[MollifiedDrift] = None) -> MonteCarloEstimate:
    """Estimate ``∫_0^T E|b_{2,n}(X_s) - b2(X_s)|^4 ds`` by left Riemann sums per path."""
    if bundle.n_paths == 0:
        raise EmptyBundle("bundle has no paths")
    bn = mollified if mollified is not None else mollify(b2, n)
    x = bundle.x_post
    h = bundle.h
    diff = np.zeros_like(x)
    live = h > 0
    diff[live] = (bn(x[live]) - b2(x[live])) ** 4 * h[live]
    return MonteCarloEstimate.from_samples(bundle.reduce_paths(diff))
