"""Scalar piecewise-linear primitives and non-smooth implicit solving."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
from scipy.optimize import brentq

TOL_RES = 1e-9

Stability = Literal["stable", "unstable", "fold"]


class NoRoot(ValueError):
    """The implicit equation has no root in the search interval."""


@dataclass(frozen=True)
class PwlInterval:
    """Closed interval ``[lo, hi]`` used as a saturation set."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class GradInterval:
    """Set-valued slope ``[min, max]``; a singleton away from set boundaries."""

    min: float
    max: float

    def __post_init__(self):
        if not self.min <= self.max:
            raise ValueError(f"bad gradient interval [{self.min}, {self.max}]")

    @property
    def is_singleton(self) -> bool:
        return self.min == self.max

    def scale(self, a: float) -> "GradInterval":
        lo, hi = sorted((a * self.min, a * self.max))
        return GradInterval(lo, hi)

    def shift(self, b: float) -> "GradInterval":
        return GradInterval(self.min + b, self.max + b)


@dataclass(frozen=True)
class BranchPoint:
    input: float
    output: float
    stability: Stability


def proj(v: float, s: PwlInterval) -> float:
    """Nearest point of ``s`` to ``v``."""
    if v < s.lo:
        return s.lo
    if v > s.hi:
        return s.hi
    return v


def proj_array(v: np.ndarray, s: PwlInterval) -> np.ndarray:
    return np.clip(v, s.lo, s.hi)


def grad_proj(v: float, s: PwlInterval, tol: float = 0.0) -> GradInterval:
    """Generalized gradient of :func:`proj`: 0 outside, [0, 1] on the boundary, 1 inside.

    ``tol`` widens the boundary for arguments computed in floating point.
    """
    if abs(v - s.lo) <= tol or abs(v - s.hi) <= tol:
        return GradInterval(0.0, 1.0)
    if v < s.lo or v > s.hi:
        return GradInterval(0.0, 0.0)
    return GradInterval(1.0, 1.0)


def contains_zero(g: GradInterval) -> bool:
    return g.min <= 0.0 <= g.max


def _segment_roots(f: Callable[[float], float], a: float, b: float, fa: float, fb: float, tol: float) -> list[float]:
    """Roots of ``f`` on ``[a, b]`` assuming ``f`` is affine there."""
    if abs(fa) <= tol and abs(fb) <= tol:
        # identically zero piece: every point is a root, represent by both ends
        return [a, b]
    roots = []
    if abs(fa) <= tol:
        roots.append(a)
    if abs(fb) <= tol:
        roots.append(b)
    if fa * fb < 0:
        z = a - fa * (b - a) / (fb - fa)
        if abs(f(z)) > tol:
            # piece straddles a kink not listed as a breakpoint
            z = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        roots.append(z)
    return roots


def implicit_solve(
    f: Callable[[float, float], float],
    input: float,
    seed: float,
    lo: float = 0.0,
    hi: float = 5.0,
    breakpoints: Iterable[float] | None = None,
    n_grid: int = 512,
    tol: float = TOL_RES,
) -> float:
    """Root ``z`` of ``f(input, z) = 0`` on ``[lo, hi]`` nearest to ``seed``.

    ``f`` must be piecewise linear in ``z``. With exact ``breakpoints`` each
    piece is solved in closed form; otherwise a uniform grid brackets the
    pieces and any piece straddling an unknown kink is polished. Ties go to
    the larger root, which gives deterministic hysteresis memory when the
    previous solution is used as the seed.
    """
    roots = all_roots(f, input, lo, hi, breakpoints, n_grid, tol)
    if not roots:
        raise NoRoot(f"no root of f({input}, z) in [{lo}, {hi}]")
    return min(roots, key=lambda z: (abs(z - seed), -z))


def all_roots(
    f: Callable[[float, float], float],
    input: float,
    lo: float = 0.0,
    hi: float = 5.0,
    breakpoints: Iterable[float] | None = None,
    n_grid: int = 512,
    tol: float = TOL_RES,
) -> list[float]:
    """Every root of ``f(input, .)`` on ``[lo, hi]``, ascending and deduplicated."""
    g = lambda z: f(input, z)  # noqa: E731
    if breakpoints is None:
        knots = np.linspace(lo, hi, n_grid + 1)
    else:
        inner = [b for b in breakpoints if lo < b < hi]
        knots = np.unique(np.concatenate([[lo, hi], inner]))
    vals = [g(float(z)) for z in knots]
    roots: list[float] = []
    for a, b, fa, fb in zip(knots[:-1], knots[1:], vals[:-1], vals[1:]):
        roots.extend(_segment_roots(g, float(a), float(b), fa, fb, tol))
    roots.sort()
    out: list[float] = []
    for z in roots:
        if not out or z - out[-1] > 1e-12:
            out.append(z)
    return [z for z in out if abs(g(z)) <= tol]


def loop_area(x: Sequence[float], y_up: Sequence[float], y_down: Sequence[float]) -> float:
    """Area enclosed between two branches sampled on the same input grid."""
    x = np.asarray(x, dtype=float)
    gap = np.abs(np.asarray(y_up, dtype=float) - np.asarray(y_down, dtype=float))
    order = np.argsort(x)
    return float(np.trapezoid(gap[order], x[order]))


def branch_stability(dfdz: GradInterval) -> Stability:
    """Stability of a root of ``F(input, z) = 0`` under ``dz/dt = -F``."""
    if contains_zero(dfdz):
        return "fold"
    return "stable" if dfdz.min > 0 else "unstable"
