"""Transition-density scans and the last-jump-gap Beta identity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import integrate, signal

from . import rng as _rng
from .errors import EmptyBundle
from .simulate import PathBundle, SimConfig, simulate_bundle
from .stats import MonteCarloEstimate

KDE_POINTS = 2048
KDE_SPAN = 6.0


def beta_half(n: int) -> float:
    """``B(n, 1/2)`` from ``B(1, 1/2) = 2`` and ``B(n+1, 1/2) = B(n, 1/2) n / (n + 1/2)``."""
    if n < 1:
        raise ValueError("n >= 1")
    b = 2.0
    for k in range(1, int(n)):
        b *= k / (k + 0.5)
    return b


def beta_half_quad(n: int) -> float:
    """``∫_0^1 u^(n-1) (1-u)^(-1/2) du`` by algebraic-weight quadrature."""
    val, _ = integrate.quad(lambda u: u ** (n - 1), 0.0, 1.0, weight="alg", wvar=(0.0, -0.5),
                            epsabs=1e-14, epsrel=1e-13)
    return float(val)


def gap_moment_analytic(n: int, t: float) -> float:
    """``E[(t - τ_n)^(-1/2) | N_t = n] = n B(n, 1/2) / sqrt(t)``; ``t^(-1/2)`` when ``n = 0``."""
    if n == 0:
        return 1.0 / np.sqrt(t)
    return n * beta_half(n) / np.sqrt(t)


@dataclass(frozen=True)
class GapMomentCheck:
    t: float
    n: int
    mc_estimate: MonteCarloEstimate
    analytic: float

    @property
    def passed(self) -> bool:
        return self.mc_estimate.within(self.analytic, 3.0)


def _generator(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    if stream is None:
        stream = _rng.Stream(0, 0)
    return _rng.substream(stream.seed, stream.index, _rng.JUMPS)


def last_jump_gap_moment(lam: float, t: float, n: int, n_mc: int, stream=None) -> GapMomentCheck:
    """Monte Carlo ``E[(t - τ_n)^(-1/2) | N_t = n]``.

    Given ``N_t = n`` the epochs are ``n`` i.i.d. uniforms on ``(0, t)`` whatever
    the intensity, so ``τ_n`` is their maximum. ``lam = 0`` or ``n = 0`` means
    no jumps, and the gap is ``t``.
    """
    if lam < 0 or not t > 0:
        raise ValueError("need lam >= 0 and t > 0")
    gen = _generator(stream)
    if lam == 0 or n == 0:
        return GapMomentCheck(t, 0, MonteCarloEstimate.from_samples(np.full(max(n_mc, 1), 1.0 / np.sqrt(t))),
                              gap_moment_analytic(0, t))
    # 1 - U is uniform on (0, 1], which keeps t - tau strictly positive
    tau = t * (1.0 - gen.random((n_mc, n))).min(axis=1)
    samples = tau ** -0.5
    return GapMomentCheck(t, n, MonteCarloEstimate.from_samples(samples), gap_moment_analytic(n, t))


# ---------------------------------------------------------------------------
# density scans


def silverman_bandwidth(x) -> float:
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return float(0.9 * spread * x.size ** -0.2)


def kde_sup(x, bandwidth: Optional[float] = None, n_points: int = KDE_POINTS, span: float = KDE_SPAN):
    """Sup of a Gaussian KDE on a grid over ``mean ± span sd`` (binned, FFT convolution).

    Returns ``(sup, bandwidth)``.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise EmptyBundle("need at least two samples for a density estimate")
    bw = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not bw > 0:
        raise ValueError("samples are degenerate: zero bandwidth")
    m, sd = x.mean(), x.std(ddof=1)
    edges = np.linspace(m - span * sd, m + span * sd, n_points + 1)
    dx = edges[1] - edges[0]
    counts, _ = np.histogram(x, bins=edges)
    half = int(np.ceil(5.0 * bw / dx))
    k = np.exp(-0.5 * (np.arange(-half, half + 1) * dx / bw) ** 2) / (bw * np.sqrt(2.0 * np.pi))
    dens = signal.fftconvolve(counts.astype(float), k, mode="same") / x.size
    return float(dens.max()), bw


@dataclass(frozen=True)
class DensityScan:
    times: np.ndarray
    sup_density: np.ndarray
    scaled: np.ndarray
    bandwidth: np.ndarray

    @property
    def band_ratio(self) -> float:
        return float(self.scaled.max() / self.scaled.min())

    def rows(self):
        for t, s, sc, bw in zip(self.times, self.sup_density, self.scaled, self.bandwidth):
            yield {"t": float(t), "sup_density": float(s), "scaled": float(sc), "bandwidth": float(bw)}


def snapshot_states(drift, policy, jumps, cfg: SimConfig, x0, t_list: Sequence[float], workers=None) -> dict:
    """States at the uniform-grid times nearest to ``t_list``, without storing full paths."""
    grid_dt = cfg.dt
    ks = {int(round(t / grid_dt)): float(t) for t in t_list}
    out = {t: np.empty(cfg.n_paths) for t in ks.values()}

    def grab(k, t, x, rows):
        if k in ks:
            out[ks[k]][rows] = x

    simulate_bundle(drift, policy, jumps, cfg, x0, record="terminal", observer=grab, workers=workers)
    return out


def density_sup_scan(data, t_list: Optional[Sequence[float]] = None, bandwidth_rule: str = "silverman") -> DensityScan:
    """``sqrt(t) sup_y ρ̂_t(y)`` per time from a full bundle or a ``{t: samples}`` mapping."""
    if bandwidth_rule != "silverman":
        raise ValueError("only the Silverman rule is available")
    if isinstance(data, PathBundle):
        if data.n_paths == 0:
            raise EmptyBundle("bundle has no paths")
        U = data.uniform_nodes()
        xp = data.x_post
        ks = [int(np.argmin(np.abs(data.grid - t))) for t in t_list]
        samples = {float(data.grid[k]): xp[U[:, k]] for k in ks}
    elif isinstance(data, Mapping):
        samples = {float(t): np.asarray(v) for t, v in data.items()
                   if t_list is None or any(np.isclose(t, s) for s in t_list)}
    else:
        raise TypeError("expected a PathBundle or a mapping of samples")
    times = np.array(sorted(samples))
    if times.size == 0:
        raise EmptyBundle("no time slices to scan")
    sups, bws = [], []
    for t in times:
        s, bw = kde_sup(samples[t])
        sups.append(s), bws.append(bw)
    sups = np.array(sups)
    return DensityScan(times, sups, np.sqrt(times) * sups, np.array(bws))
