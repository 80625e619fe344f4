"""Monte Carlo summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBundle

Z95 = 1.96


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_err: float
    ci95: float
    n: int

    @classmethod
    def from_samples(cls, samples) -> "MonteCarloEstimate":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            raise EmptyBundle("no samples to average")
        mean = float(x.mean())
        se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(mean, se, Z95 * se, int(x.size))

    @property
    def interval(self) -> tuple[float, float]:
        return (self.mean - self.ci95, self.mean + self.ci95)

    def within(self, target: float, k: float = 3.0) -> bool:
        """True when ``target`` lies within ``k`` standard errors of the mean."""
        return abs(self.mean - target) <= k * self.std_err

    def __str__(self) -> str:
        return f"{self.mean:.6g} ± {self.ci95:.2g} (n={self.n})"


def combined_se(*ses: float) -> float:
    return float(np.sqrt(np.sum(np.square(ses))))
