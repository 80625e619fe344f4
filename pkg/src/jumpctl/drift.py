"""Drift coefficients: piecewise Lipschitz functions and the b1 + b2 + b3 split."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def gauss_legendre(fn, a, b):
    """Integral of ``fn`` over [a, b] (arrays broadcast) with 32-node Gauss-Legendre."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[..., None] + half[..., None] * _GL_NODES
    return half * np.sum(np.asarray(fn(nodes), dtype=float) * _GL_WEIGHTS, axis=-1)


@dataclass(frozen=True)
class Piece:
    """One Lipschitz piece of a piecewise function.

    ``slope``/``intercept`` are set for affine pieces and enable closed-form
    integrals; otherwise integrals fall back to Gauss-Legendre quadrature.
    """

    fn: Callable
    lipschitz: float
    slope: Optional[float] = None
    intercept: Optional[float] = None

    @classmethod
    def constant(cls, c: float) -> "Piece":
        c = float(c)
        return cls(lambda x, c=c: np.full(np.shape(x), c), 0.0, 0.0, c)

    @classmethod
    def affine(cls, slope: float, intercept: float = 0.0) -> "Piece":
        m, q = float(slope), float(intercept)
        return cls(lambda x, m=m, q=q: m * np.asarray(x, dtype=float) + q, abs(m), m, q)

    @property
    def is_affine(self) -> bool:
        return self.slope is not None

    def __call__(self, x):
        return self.fn(x)

    def integral(self, a, b):
        if self.is_affine:
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            return 0.5 * self.slope * (b * b - a * a) + self.intercept * (b - a)
        return gauss_legendre(self.fn, a, b)


@dataclass(frozen=True)
class PiecewiseLipschitzFn:
    """Function that is Lipschitz between finitely many breakpoints.

    Piece ``k`` lives on ``[xi_k, xi_{k+1})`` (piece 0 on ``(-inf, xi_1)``), so a
    breakpoint evaluates to its right limit.
    """

    breakpoints: tuple
    pieces: tuple
    global_bound: Optional[float] = None
    left_limits: tuple = field(init=False)
    right_limits: tuple = field(init=False)
    _anchors: np.ndarray = field(init=False, repr=False)
    _anchor_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        xi = tuple(float(v) for v in self.breakpoints)
        pieces = tuple(self.pieces)
        if len(pieces) != len(xi) + 1:
            raise ValueError(f"need {len(xi) + 1} pieces for {len(xi)} breakpoints, got {len(pieces)}")
        if any(b <= a for a, b in zip(xi, xi[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", xi)
        object.__setattr__(self, "pieces", pieces)
        left = tuple(float(pieces[k](np.array(x))) for k, x in enumerate(xi))
        right = tuple(float(pieces[k + 1](np.array(x))) for k, x in enumerate(xi))
        object.__setattr__(self, "left_limits", left)
        object.__setattr__(self, "right_limits", right)
        if self.global_bound is None:
            object.__setattr__(self, "global_bound", self._estimate_bound())
        self._init_primitive()

    # construction helpers -------------------------------------------------

    @classmethod
    def zero(cls) -> "PiecewiseLipschitzFn":
        return cls((), (Piece.constant(0.0),), 0.0)

    @classmethod
    def step(cls, breakpoints: Sequence[float], values: Sequence[float]) -> "PiecewiseLipschitzFn":
        """Piecewise constant function taking ``values[k]`` on piece ``k``."""
        values = [float(v) for v in values]
        return cls(tuple(breakpoints), tuple(Piece.constant(v) for v in values), max(abs(v) for v in values))

    # evaluation -----------------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.breakpoints)

    @property
    def is_zero(self) -> bool:
        return all(p.is_affine and p.slope == 0.0 and p.intercept == 0.0 for p in self.pieces)

    @property
    def is_affine(self) -> bool:
        return all(p.is_affine for p in self.pieces)

    @property
    def lipschitz(self) -> float:
        return max(p.lipschitz for p in self.pieces)

    def piece_index(self, x):
        return np.searchsorted(np.asarray(self.breakpoints), x, side="right")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.m == 0:
            return np.asarray(self.pieces[0](x), dtype=float) * np.ones_like(x)
        idx = self.piece_index(x)
        out = np.empty_like(x)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = piece(x[mask])
        return out

    def jumps(self) -> np.ndarray:
        """Right limit minus left limit at each breakpoint."""
        return np.asarray(self.right_limits) - np.asarray(self.left_limits)

    # antiderivative with base point 0 ------------------------------------

    def _init_primitive(self):
        xi = self.breakpoints
        m = len(xi)
        j0 = int(np.searchsorted(np.asarray(xi), 0.0, side="right"))
        anchors = np.empty(m + 1)
        values = np.empty(m + 1)
        anchors[j0] = 0.0
        values[j0] = 0.0
        # F at breakpoints, walking outward from the piece that contains 0
        f_at = {}
        if j0 < m:
            f_at[j0] = float(self.pieces[j0].integral(0.0, xi[j0]))
            for k in range(j0 + 1, m):
                f_at[k] = f_at[k - 1] + float(self.pieces[k].integral(xi[k - 1], xi[k]))
        if j0 >= 1:
            f_at[j0 - 1] = -float(self.pieces[j0].integral(xi[j0 - 1], 0.0))
            for k in range(j0 - 2, -1, -1):
                f_at[k] = f_at[k + 1] - float(self.pieces[k + 1].integral(xi[k], xi[k + 1]))
        for j in range(m + 1):
            if j == j0:
                continue
            if j >= 1:
                anchors[j], values[j] = xi[j - 1], f_at[j - 1]
            else:
                anchors[j], values[j] = xi[0], f_at[0]
        object.__setattr__(self, "_anchors", anchors)
        object.__setattr__(self, "_anchor_values", values)

    def primitive(self, x):
        """Exact piecewise integral from 0 to ``x``."""
        x = np.asarray(x, dtype=float)
        idx = self.piece_index(x) if self.m else np.zeros(x.shape, dtype=int)
        out = np.empty_like(x)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                a = self._anchors[k]
                out[mask] = self._anchor_values[k] + piece.integral(np.full(mask.sum(), a), x[mask])
        return out

    def _estimate_bound(self) -> float:
        lo = (self.breakpoints[0] if self.m else 0.0) - 50.0
        hi = (self.breakpoints[-1] if self.m else 0.0) + 50.0
        grid = np.linspace(lo, hi, 20001)
        return float(np.max(np.abs(self(grid))))


def _zero_xa(x, a):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(a)).shape)


def _zero_x(x):
    return np.zeros(np.shape(x))


@dataclass(frozen=True)
class DriftDecomposition:
    """Drift ``b(x, a) = b1(x, a) + b2(x) + b3(x)``.

    ``b1`` is bounded C1 in both arguments, ``b2`` bounded and piecewise
    Lipschitz (any object with ``__call__`` and ``primitive``), ``b3`` C1 with
    linear growth bounded by ``growth * (1 + |x|)``.
    """

    b1: Callable = _zero_xa
    db1_dx: Callable = _zero_xa
    db1_da: Callable = _zero_xa
    b2: Optional[object] = None
    b3: Callable = _zero_x
    db3_dx: Callable = _zero_x
    growth: float = 0.0

    def __post_init__(self):
        if self.b2 is None:
            object.__setattr__(self, "b2", PiecewiseLipschitzFn.zero())

    def __call__(self, x, a):
        x = np.asarray(x, dtype=float)
        return self.b1(x, a) + self.b2(x) + self.b3(x)

    def smooth(self, x, a):
        """The continuous part ``b1 + b3``."""
        x = np.asarray(x, dtype=float)
        return self.b1(x, a) + self.b3(x)

    @property
    def has_b2(self) -> bool:
        return not getattr(self.b2, "is_zero", False)

    def with_b2(self, b2) -> "DriftDecomposition":
        return replace(self, b2=b2)

    @classmethod
    def linear(cls, slope: float) -> "DriftDecomposition":
        """Pure ``b3(x) = slope * x``."""
        s = float(slope)
        return cls(b3=lambda x: s * np.asarray(x, dtype=float), db3_dx=lambda x: np.full(np.shape(x), s), growth=abs(s))

    def check_bounds(self, box=(-10.0, 10.0), controls=(-1.0, 1.0), n=401) -> dict:
        """Sampled sup norms of b1 and its derivatives, and of db3/dx.

        Also returns the smallest ``K`` with ``|b3(x)| <= K (1 + |x|)`` on the box.
        """
        xs = np.linspace(*box, n)
        aa = np.linspace(*controls, 41)
        X, A = np.meshgrid(xs, aa)
        b3 = np.abs(self.b3(xs))
        return {
            "b1": float(np.max(np.abs(self.b1(X, A)))),
            "db1_dx": float(np.max(np.abs(self.db1_dx(X, A)))),
            "db1_da": float(np.max(np.abs(self.db1_da(X, A)))),
            "db3_dx": float(np.max(np.abs(self.db3_dx(xs)))),
            "b3_growth": float(np.max(b3 / (1.0 + np.abs(xs)))),
        }
