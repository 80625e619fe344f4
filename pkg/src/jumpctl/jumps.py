"""Finite-activity compound Poisson jumps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

_U_EPS = 1e-300


def _identity(z):
    return np.asarray(z, dtype=float)


@dataclass(frozen=True)
class JumpModel:
    """Jump intensity ``intensity`` (events per unit time), a frozen scipy
    distribution for the jump size, and the jump map ``gamma``."""

    intensity: float
    size_law: object
    gamma: Callable = _identity

    def __post_init__(self):
        if not (0.0 <= self.intensity < np.inf):
            raise ValueError("jump intensity must be finite and non-negative")

    @property
    def active(self) -> bool:
        return self.intensity > 0.0

    def sizes_from_uniforms(self, u):
        return np.asarray(self.size_law.ppf(np.clip(u, _U_EPS, 1.0 - 1e-16)), dtype=float)

    def moment_gamma(self, p: float) -> float:
        """``∫ |gamma(z)|^p nu(dz)``."""
        if not self.active:
            return 0.0
        return self.intensity * float(self.size_law.expect(lambda z: np.abs(self.gamma(z)) ** p))

    @property
    def compensator(self) -> float:
        """``∫ gamma(z) nu(dz)``."""
        if not self.active:
            return 0.0
        return self.intensity * float(self.size_law.expect(lambda z: self.gamma(z)))


def point_mass(z: float):
    return stats.rv_discrete(values=([float(z)], [1.0]))


def normal_jumps(intensity: float, mean: float, std: float, gamma: Callable = _identity) -> JumpModel:
    law = point_mass(mean) if std == 0 else stats.norm(loc=mean, scale=std)
    return JumpModel(intensity, law, gamma)


def constant_jumps(intensity: float, size: float = 1.0, gamma: Callable = _identity) -> JumpModel:
    return JumpModel(intensity, point_mass(size), gamma)


NO_JUMPS = JumpModel(0.0, point_mass(0.0))


@dataclass(frozen=True)
class JumpRecord:
    epochs: np.ndarray
    sizes: np.ndarray
    increments: np.ndarray
    # bridge normals used to split the Brownian increment at each epoch
    bridge: np.ndarray

    @property
    def count(self) -> int:
        return int(self.epochs.size)


def _draw(jumps: JumpModel, t0: float, T: float, rng: np.random.Generator):
    n = int(rng.poisson(jumps.intensity * (T - t0))) if jumps.active else 0
    epochs = t0 + (T - t0) * np.sort(rng.random(n))
    u = 1.0 - rng.random(n)
    bridge = rng.standard_normal(n)
    return epochs, u, bridge


def sample_jumps(jumps: JumpModel, T: float, stream: np.random.Generator, t0: float = 0.0) -> JumpRecord:
    """Jump epochs on ``(t0, T)``, sizes and increments for one path."""
    if T <= t0:
        raise ValueError("T must exceed the start time")
    epochs, u, bridge = _draw(jumps, t0, T, stream)
    sizes = jumps.sizes_from_uniforms(u) if epochs.size else np.empty(0)
    return JumpRecord(epochs, sizes, np.asarray(jumps.gamma(sizes), dtype=float), bridge)
