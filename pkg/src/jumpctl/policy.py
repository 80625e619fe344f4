"""Feedback control policies with values clipped to a closed interval."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .drift import Piece, PiecewiseLipschitzFn

KINDS = ("constant", "linear_feedback", "threshold", "sign", "custom")


@dataclass(frozen=True)
class ControlPolicy:
    """Markov policy ``a = clip(fn(t, x), lo, hi)``.

    ``feedback`` optionally describes the clipped, time-homogeneous map
    ``x -> a`` as a piecewise Lipschitz function; it is what lets a policy be
    folded into the drift for closed-loop first variations.
    """

    kind: str
    lo: float
    hi: float
    fn: Callable
    name: str = ""
    feedback: Optional[PiecewiseLipschitzFn] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not self.lo <= self.hi:
            raise ValueError("policy bounds must satisfy lo <= hi")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def bound(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def __call__(self, t, x, pos=None):
        x = np.asarray(x, dtype=float)
        return np.clip(np.broadcast_to(self.fn(t, x), x.shape).astype(float), self.lo, self.hi)

    # library ----------------------------------------------------------

    @classmethod
    def constant(cls, value: float, lo: float, hi: float, name: str = "") -> "ControlPolicy":
        v = float(np.clip(value, lo, hi))
        return cls("constant", lo, hi, lambda t, x: np.full(np.shape(x), v), name,
                   PiecewiseLipschitzFn((), (Piece.constant(v),), abs(v)))

    @classmethod
    def linear_feedback(cls, gain: float, lo: float, hi: float, name: str = "") -> "ControlPolicy":
        """``a = clip(gain * x)``."""
        k = float(gain)
        if k == 0:
            return cls.constant(0.0, lo, hi, name)
        cuts = sorted((lo / k, hi / k))
        left, right = (hi, lo) if k < 0 else (lo, hi)
        fb = PiecewiseLipschitzFn(tuple(cuts), (Piece.constant(left), Piece.affine(k), Piece.constant(right)),
                                  max(abs(lo), abs(hi)))
        return cls("linear_feedback", lo, hi, lambda t, x: k * x, name, fb)

    @classmethod
    def threshold(cls, level: float, value: float, lo: float, hi: float, name: str = "") -> "ControlPolicy":
        """``a = value * 1{x > level}`` (strict inequality)."""
        lv, v = float(level), float(np.clip(value, lo, hi))
        fb = PiecewiseLipschitzFn.step((lv,), (0.0, v))
        return cls("threshold", lo, hi, lambda t, x: np.where(x > lv, v, 0.0), name, fb)

    @classmethod
    def sign(cls, a_max: float, name: str = "") -> "ControlPolicy":
        """``a = a_max * sgn(x)`` with ``sgn(0) = 0`` on ``[-a_max, a_max]``."""
        a = float(a_max)
        fb = PiecewiseLipschitzFn.step((0.0,), (-a, a))
        return cls("sign", -a, a, lambda t, x: a * np.sign(x), name, fb)

    @classmethod
    def custom(cls, fn: Callable, lo: float, hi: float, name: str = "", feedback=None) -> "ControlPolicy":
        return cls("custom", lo, hi, fn, name, feedback)


@dataclass(frozen=True)
class ReplayControl:
    """Open-loop control that replays recorded node values.

    Used to perturb the initial state while holding the control process fixed:
    both runs share the same jump-adapted grid, so node positions line up.
    """

    values: np.ndarray
    name: str = "replay"

    def __call__(self, t, x, pos=None):
        if pos is None:
            raise ValueError("replayed controls need node positions (record='full')")
        return self.values[pos]
