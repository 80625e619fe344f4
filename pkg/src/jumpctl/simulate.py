"""Jump-adapted Euler simulation of the controlled state equation.

The uniform ``dt`` grid is refined by every jump epoch. Between nodes the state
moves by ``drift * h + diffusion * dB``; at an epoch it jumps. Brownian
increments over a step that contains epochs are split with Brownian-bridge
draws, so the increment over each uniform step does not depend on the jumps.

A bundle stores all paths in one flat node table with per-path ``offsets``
(node ``j`` of path ``i`` is row ``offsets[i] + j``). Each row holds the node
time, the left-limit state, the control used on the following sub-step and
that sub-step's Brownian increment. Jump nodes are listed separately with the
size, increment and post-jump state.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng as _rng
from .drift import DriftDecomposition
from .errors import EmptyBundle, NonFiniteState
from .jumps import NO_JUMPS, JumpModel, _draw
from .stats import MonteCarloEstimate

CHUNK = 4096
SCHEMES = ("direct_euler", "transformed")


@dataclass(frozen=True)
class SimConfig:
    T: float
    dt: float
    n_paths: int = 1
    seed: int = 0
    sigma: float = 0.0
    scheme: str = "direct_euler"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt > 0")
        if not self.T > 0:
            raise ValueError("T > 0")
        if self.dt > self.T:
            raise ValueError("dt <= T")
        if self.n_paths < 1:
            raise ValueError("n_paths >= 1")
        if self.sigma < 0:
            raise ValueError("sigma >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


def time_grid(t0: float, T: float, dt: float) -> np.ndarray:
    n = max(1, int(np.ceil((T - t0) / dt - 1e-9)))
    grid = t0 + dt * np.arange(n + 1)
    grid[-1] = T
    return grid


@dataclass
class SamplePath:
    times: np.ndarray
    states: np.ndarray          # left limits at each node
    post_states: np.ndarray     # value after any jump at the node
    brownian_increments: np.ndarray  # per sub-step, len(times) - 1
    control_values: np.ndarray       # per sub-step
    jump_epochs: np.ndarray
    jump_sizes: np.ndarray
    jump_increments: np.ndarray      # gamma(z)
    jump_nodes: np.ndarray           # node indices of the jumps
    sigma: float = float("nan")

    @property
    def x_T(self) -> float:
        return float(self.states[-1])


@dataclass
class PathBundle:
    grid: np.ndarray
    offsets: np.ndarray
    x_T: np.ndarray
    x0: np.ndarray
    path_ids: np.ndarray
    seed: int
    sigma: float
    t: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None
    a: Optional[np.ndarray] = None
    dB: Optional[np.ndarray] = None
    jump_pos: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    jump_z: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_gamma: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_post: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_paths(self) -> int:
        return int(self.x_T.size)

    @property
    def full(self) -> bool:
        return self.x is not None

    @property
    def n_nodes(self) -> int:
        return int(self.offsets[-1])

    def _need_full(self):
        if not self.full:
            raise ValueError("bundle was simulated with record='terminal'")

    @property
    def x_post(self) -> np.ndarray:
        self._need_full()
        xp = self.x.copy()
        xp[self.jump_pos] = self.jump_post
        return xp

    @property
    def h(self) -> np.ndarray:
        """Sub-step length following each node (0 at each path's last node)."""
        self._need_full()
        h = np.diff(self.t, append=self.t[-1])
        h[self.offsets[1:] - 1] = 0.0
        return h

    @property
    def node_path(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_paths), np.diff(self.offsets))

    @property
    def last_nodes(self) -> np.ndarray:
        return self.offsets[1:] - 1

    def uniform_nodes(self) -> np.ndarray:
        """Row indices of the uniform-grid nodes, shape (n_paths, len(grid))."""
        self._need_full()
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.jump_pos] = False
        return np.flatnonzero(mask).reshape(self.n_paths, self.grid.size)

    def path(self, i: int) -> SamplePath:
        self._need_full()
        lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
        sel = (self.jump_pos >= lo) & (self.jump_pos < hi)
        post = self.x[lo:hi].copy()
        jn = self.jump_pos[sel] - lo
        post[jn] = self.jump_post[sel]
        return SamplePath(
            times=self.t[lo:hi].copy(),
            states=self.x[lo:hi].copy(),
            post_states=post,
            brownian_increments=self.dB[lo:hi - 1].copy(),
            control_values=self.a[lo:hi - 1].copy(),
            jump_epochs=self.t[self.jump_pos[sel]].copy(),
            jump_sizes=self.jump_z[sel].copy(),
            jump_increments=self.jump_gamma[sel].copy(),
            jump_nodes=jn,
            sigma=self.sigma,
        )

    def reduce_paths(self, node_values) -> np.ndarray:
        """Per-path sums of a node-level array."""
        return np.add.reduceat(np.asarray(node_values, dtype=float), self.offsets[:-1])


# --------------------------------------------------------------------------
# engine


def _workers(workers: Optional[int]) -> int:
    if workers is None:
        workers = int(os.environ.get("JUMPCTL_THREADS", "1") or 1)
    return max(1, int(workers))


def integrate(
    x0,
    t0: float,
    T: float,
    dt: float,
    seed: int,
    path_ids,
    drift_fn: Callable,
    diff_fn: Callable,
    jump_fn: Callable,
    jumps: JumpModel = NO_JUMPS,
    record: str = "full",
    workers: Optional[int] = None,
    observer: Optional[Callable] = None,
    sigma_label: float = float("nan"),
) -> PathBundle:
    """Generic jump-adapted Euler integrator.

    ``drift_fn(t, x, pos) -> (drift, control)``, ``diff_fn(x) -> coefficient``
    and ``jump_fn(x, z) -> post-jump state`` act on arrays. ``pos`` holds node
    rows (``None`` for terminal-only runs). ``observer(k, t_k, x, rows)`` is
    called after each uniform step with the chunk's global path rows.
    """
    if record not in ("full", "terminal"):
        raise ValueError("record must be 'full' or 'terminal'")
    path_ids = np.asarray(path_ids, dtype=np.int64)
    n = path_ids.size
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (n,)).copy()
    grid = time_grid(t0, T, dt)
    n_steps = grid.size - 1

    # jump epochs, uniforms for sizes, bridge normals: one substream per path
    counts = np.zeros(n, dtype=np.int64)
    ep, uu, br = [], [], []
    if jumps.active:
        for i, pid in enumerate(path_ids):
            e, u, b = _draw(jumps, t0, T, _rng.substream(seed, int(pid), _rng.JUMPS))
            counts[i] = e.size
            ep.append(e), uu.append(u), br.append(b)
    n_jumps = int(counts.sum())
    if n_jumps:
        j_epoch = np.concatenate(ep)
        j_z = jumps.sizes_from_uniforms(np.concatenate(uu))
        j_bridge = np.concatenate(br)
    else:
        j_epoch = j_z = j_bridge = np.empty(0)
    j_path = np.repeat(np.arange(n), counts)
    j_step = np.clip(np.searchsorted(grid, j_epoch, side="right") - 1, 0, n_steps - 1)
    j_start = np.concatenate([[0], np.cumsum(counts)])

    offsets = np.concatenate([[0], np.cumsum(n_steps + 1 + counts)]).astype(np.int64)
    full = record == "full"
    out = {
        "x_T": np.empty(n),
        "jump_pos": np.empty(n_jumps, dtype=np.int64),
        "jump_post": np.empty(n_jumps),
    }
    if full:
        total = int(offsets[-1])
        out.update(t=np.empty(total), x=np.empty(total), a=np.empty(total), dB=np.empty(total))

    chunks = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]

    def run(chunk):
        lo, hi = chunk
        _integrate_chunk(lo, hi, x0, grid, seed, path_ids, drift_fn, diff_fn, jump_fn,
                         j_epoch, j_z, j_bridge, j_path, j_step, j_start, offsets, out, full, observer)

    nw = _workers(workers)
    if nw == 1 or len(chunks) == 1:
        for c in chunks:
            run(c)
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            list(pool.map(run, chunks))

    bundle = PathBundle(grid=grid, offsets=offsets, x_T=out["x_T"], x0=x0, path_ids=path_ids,
                        seed=seed, sigma=sigma_label,
                        jump_pos=out["jump_pos"] if full else np.empty(0, dtype=np.int64),
                        jump_z=j_z, jump_gamma=np.asarray(jumps.gamma(j_z), dtype=float) if n_jumps else np.empty(0),
                        jump_post=out["jump_post"])
    if full:
        bundle.t, bundle.x, bundle.a, bundle.dB = out["t"], out["x"], out["a"], out["dB"]
    return bundle


def _check_finite(x, lo, sub=None):
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        idx = lo + (int(sub[bad]) if sub is not None else bad)
        raise NonFiniteState(f"state became non-finite on path {idx}", path_index=idx)


def _integrate_chunk(lo, hi, x0, grid, seed, path_ids, drift_fn, diff_fn, jump_fn,
                     j_epoch, j_z, j_bridge, j_path, j_step, j_start, offsets, out, full, observer):
    nc = hi - lo
    n_steps = grid.size - 1
    Z = _rng.brownian_normals(seed, path_ids[lo:hi], n_steps)
    x = x0[lo:hi].copy()
    off = offsets[lo:hi]
    cb = np.zeros(nc, dtype=np.int64)  # jumps already passed, per path
    rows = np.arange(lo, hi)

    jl, jh = j_start[lo], j_start[hi]
    jidx = np.arange(jl, jh)
    # group this chunk's jumps by step, keeping (path, epoch) order inside a step
    order = jidx[np.argsort(j_step[jl:jh], kind="stable")]
    steps_sorted = j_step[order]
    bounds = np.searchsorted(steps_sorted, np.arange(n_steps + 1))

    for k in range(n_steps):
        tk, tk1 = grid[k], grid[k + 1]
        h = tk1 - tk
        dW = np.sqrt(h) * Z[:, k]
        pos = off + k + cb if full else None
        b, a = drift_fn(tk, x, pos)
        b = np.broadcast_to(np.asarray(b, dtype=float), x.shape)
        s = diff_fn(x)
        J = order[bounds[k]:bounds[k + 1]]
        if J.size == 0:
            if full:
                out["t"][pos] = tk
                out["x"][pos] = x
                out["a"][pos] = a
                out["dB"][pos] = dW
            x = x + b * h + s * dW
        else:
            jp = j_path[J] - lo                     # local path of each jump
            P, first = np.unique(jp, return_index=True)
            rank = np.arange(J.size) - np.repeat(first, np.diff(np.append(first, J.size)))
            x_new = x + b * h + s * dW
            if full:
                out["t"][pos] = tk
                out["x"][pos] = x
                out["a"][pos] = a
                out["dB"][pos] = dW
            # sub-step the jumping paths
            cur_t = np.full(P.size, tk)
            cur_x = x[P].copy()
            rem = dW[P].copy()
            cur_pos = pos[P].copy() if full else None
            b_c = b[P]
            s_c = np.asarray(s)[P] if np.ndim(s) else s
            for r in range(int(rank.max()) + 1):
                sel = J[rank == r]
                act = np.searchsorted(P, j_path[sel] - lo)
                if r > 0:
                    pos_r = cur_pos[act] if full else None
                    b_r, a_r = drift_fn(cur_t[act], cur_x[act], pos_r)
                    s_r = diff_fn(cur_x[act])
                    if full:
                        out["a"][pos_r] = a_r
                else:
                    b_r, s_r = b_c[act], (s_c[act] if np.ndim(s_c) else s_c)
                L = tk1 - cur_t[act]
                sub = j_epoch[sel] - cur_t[act]
                frac = np.where(L > 0, sub / np.where(L > 0, L, 1.0), 0.0)
                dB1 = frac * rem[act] + np.sqrt(np.maximum(sub * (L - sub), 0.0) / np.where(L > 0, L, 1.0)) * j_bridge[sel]
                rem[act] -= dB1
                x_pre = cur_x[act] + b_r * sub + s_r * dB1
                x_post = jump_fn(x_pre, j_z[sel])
                if full:
                    out["dB"][cur_pos[act]] = dB1
                    jpos = cur_pos[act] + 1
                    out["t"][jpos] = j_epoch[sel]
                    out["x"][jpos] = x_pre
                    out["jump_pos"][sel] = jpos
                    cur_pos[act] = jpos
                out["jump_post"][sel] = x_post
                cur_t[act] = j_epoch[sel]
                cur_x[act] = x_post
                _check_finite(x_post, lo, P[act])
            pos_f = cur_pos if full else None
            b_f, a_f = drift_fn(cur_t, cur_x, pos_f)
            s_f = diff_fn(cur_x)
            if full:
                out["a"][pos_f] = a_f
                out["dB"][pos_f] = rem
            x_new[P] = cur_x + b_f * (tk1 - cur_t) + s_f * rem
            cb[P] += np.bincount(jp, minlength=nc)[P]
            x = x_new
        _check_finite(x, lo)
        if observer is not None:
            observer(k + 1, tk1, x, rows)

    out["x_T"][lo:hi] = x
    if full:
        last = offsets[lo + 1:hi + 1] - 1
        out["t"][last] = grid[-1]
        out["x"][last] = x
        out["a"][last] = np.nan
        out["dB"][last] = np.nan


# --------------------------------------------------------------------------
# public API


def _direct_fns(drift: DriftDecomposition, policy, jumps: JumpModel, sigma: float):
    def drift_fn(t, x, pos):
        a = policy(t, x, pos)
        return drift(x, a), a

    def diff_fn(x):
        return sigma

    def jump_fn(x, z):
        return x + jumps.gamma(z)

    return drift_fn, diff_fn, jump_fn


def simulate_bundle(drift, policy, jumps, cfg: SimConfig, x0, *, t0: float = 0.0, path_ids=None,
                    record: str = "full", workers: Optional[int] = None, observer=None,
                    seed: Optional[int] = None) -> PathBundle:
    """Simulate ``cfg.n_paths`` paths (or one per entry of ``path_ids``).

    Path ``i`` draws from the substream keyed by ``(seed, path_ids[i])``.
    ``x0`` may be a scalar or one start value per path.
    """
    jumps = jumps or NO_JUMPS
    seed = cfg.seed if seed is None else seed
    if path_ids is None:
        path_ids = np.arange(cfg.n_paths)
    if cfg.scheme == "transformed":
        from .transform import simulate_transformed_bundle

        return simulate_transformed_bundle(drift, policy, jumps, cfg, x0, t0=t0, path_ids=path_ids,
                                           record=record, workers=workers, seed=seed)
    fns = _direct_fns(drift, policy, jumps, cfg.sigma)
    return integrate(x0, t0, cfg.T, cfg.dt, seed, path_ids, *fns, jumps=jumps, record=record,
                     workers=workers, observer=observer, sigma_label=cfg.sigma)


def simulate_path(drift, policy, jumps, cfg: SimConfig, x0: float, stream=None) -> SamplePath:
    stream = stream or _rng.Stream(cfg.seed, 0)
    bundle = simulate_bundle(drift, policy, jumps, cfg, x0, path_ids=[stream.index], seed=stream.seed)
    return bundle.path(0)


def running_cost(bundle: PathBundle, f: Callable) -> np.ndarray:
    """Per-path left-Riemann sum of ``f(t, x, a)`` over the jump-adapted grid."""
    bundle._need_full()
    h = bundle.h
    a = np.where(np.isnan(bundle.a), 0.0, bundle.a)
    vals = np.asarray(f(bundle.t, bundle.x_post, a), dtype=float) * np.ones_like(h)
    return bundle.reduce_paths(np.where(h > 0, vals * h, 0.0))


def evaluate_cost(bundle: PathBundle, f: Optional[Callable] = None, g: Optional[Callable] = None) -> MonteCarloEstimate:
    """Estimate ``E[∫ f(t, X_t, a_t) dt + g(X_T)]`` from a bundle."""
    if bundle.n_paths == 0:
        raise EmptyBundle("bundle has no paths")
    total = np.zeros(bundle.n_paths)
    if f is not None:
        total += running_cost(bundle, f)
    if g is not None:
        total += np.asarray(g(bundle.x_T), dtype=float)
    return MonteCarloEstimate.from_samples(total)
