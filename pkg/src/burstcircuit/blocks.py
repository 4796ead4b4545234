"""Static characteristics of the transistor blocks and their gains.

Every NPN is abstracted as a 0.6 V base-emitter switch feeding a current
source ``beta * i_b`` that saturates at ``v_ce_sat``. Under that
abstraction each block output is a clamped affine map of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .pwl import (
    BranchPoint,
    GradInterval,
    PwlInterval,
    all_roots,
    branch_stability,
    contains_zero,
    grad_proj,
    implicit_solve,
    proj,
)

IS_DIODE = 1e-14
VT = 0.02585


class NoConvergence(RuntimeError):
    pass


class NotNonMonotone(ValueError):
    """Condition g1*g2 >= g3 fails, so the block has no interior extrema."""


@dataclass(frozen=True)
class TransistorModel:
    """Switch-plus-current-source NPN.

    ``r_e`` is an optional series emitter resistance inside the junction
    (0 gives the bare switch used by the closed-form block gains).
    """

    beta: float = 100.0
    v_on: float = 0.6
    v_ce_sat: float = 0.1
    r_e: float = 0.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.r_e < 0:
            raise ValueError("r_e must be non-negative")


def linearized_junction(i_ref: float = 1e-3, beta: float = 100.0, i_s: float = IS_DIODE) -> TransistorModel:
    """Tangent of the exponential base-emitter diode at emitter current ``i_ref``."""
    return TransistorModel(beta=beta, v_on=float(VT * np.log(i_ref / i_s)), r_e=VT / i_ref)


@dataclass(frozen=True)
class SaturationParams:
    """Common-emitter stage: base resistor, collector load, emitter resistor.

    ``r_bias`` optionally ties the emitter to ``v_cc`` as well (the v_z
    conditioner stage); ``r_b`` may be 0 when the base is driven directly.
    """

    r_b: float
    r_c: float
    r_e: float
    v_cc: float = 5.0
    model: TransistorModel = field(default_factory=TransistorModel)
    r_bias: float | None = None

    def __post_init__(self):
        if self.r_b < 0 or self.r_c <= 0 or self.r_e <= 0:
            raise ValueError("resistances must be positive")
        if self.v_cc <= self.model.v_ce_sat:
            raise ValueError("v_cc must exceed v_ce_sat")

    def emitter_thevenin(self) -> tuple[float, float]:
        """(open-circuit emitter voltage, emitter source resistance)."""
        if self.r_bias is None:
            return 0.0, self.r_e
        r = self.r_e * self.r_bias / (self.r_e + self.r_bias)
        return self.v_cc * self.r_e / (self.r_e + self.r_bias), r


@dataclass(frozen=True)
class NonMonotoneParams:
    """Saturation stage plus the three-resistor summing node.

    ``r_a1`` joins the summing node to ``v_y``, ``r_a2`` to the saturation
    output ``v1`` and ``r_s`` to ground.
    """

    sat: SaturationParams
    r_a1: float
    r_a2: float
    r_s: float

    def __post_init__(self):
        if min(self.r_a1, self.r_a2, self.r_s) <= 0:
            raise ValueError("resistances must be positive")


@dataclass(frozen=True)
class DiffAmpParams:
    """Emitter-coupled pair; output at the collector of the first transistor."""

    r_b2: float
    r_b3: float
    r_e_shared: float
    r_c2: float
    r_c3: float
    v_cc: float = 5.0
    model: TransistorModel = field(default_factory=TransistorModel)

    def __post_init__(self):
        if min(self.r_b2, self.r_b3, self.r_e_shared, self.r_c2, self.r_c3) <= 0:
            raise ValueError("resistances must be positive")


@dataclass(frozen=True)
class HysteresisParams:
    """Emitter-coupled pair whose output collector feeds back to the second base.

    ``r_c_out`` loads the output collector (node v_x), ``r_c_comp`` the
    complementary collector, ``r_b_in`` the base driven by v5 and ``r_b_fb``
    the feedback base resistor.
    """

    r_c_out: float
    r_c_comp: float
    r_b_in: float
    r_b_fb: float
    r_e_shared: float
    v_cc: float = 5.0
    model: TransistorModel = field(default_factory=TransistorModel)

    def as_diffamp(self) -> DiffAmpParams:
        return DiffAmpParams(
            r_b2=self.r_b_in,
            r_b3=self.r_b_fb,
            r_e_shared=self.r_e_shared,
            r_c2=self.r_c_out,
            r_c3=self.r_c_comp,
            v_cc=self.v_cc,
            model=self.model,
        )


@dataclass(frozen=True)
class Gains:
    g1: float
    g2: float
    g3: float
    g4: float
    g5: float
    g6: float
    g7: float
    vs1: float
    vs2: float
    vs3: float
    d: float


# -- saturation block ------------------------------------------------------

def saturation_gains(p: SaturationParams) -> tuple[float, float]:
    """Small-signal gain ``g1`` and output swing ``vs1`` of a common-emitter stage."""
    b = p.model.beta
    g1 = b * p.r_c / (p.r_b + (b + 1) * p.r_e)
    vs1 = (p.v_cc - p.model.v_ce_sat) * p.r_c / (p.r_c + p.r_e)
    return g1, vs1


def saturation_eval(p: SaturationParams, v_y: float) -> float:
    g1, vs1 = saturation_gains(p)
    return p.v_cc - proj(g1 * (v_y - p.model.v_on), PwlInterval(0.0, vs1))


def saturation_breakpoints(p: SaturationParams) -> tuple[float, float]:
    g1, vs1 = saturation_gains(p)
    return p.model.v_on, p.model.v_on + vs1 / g1


def smooth_ce_oracle(p: SaturationParams, v_y: float, max_iter: int = 200) -> float:
    """Common-emitter operating point with an exponential base junction.

    The junction obeys ``i_b = (Is / beta) (exp(v_be / VT) - 1)``; the
    collector carries ``beta * i_b`` until ``v_ce`` reaches ``v_ce_sat``.
    The base current is found by bisection on the input loop equation.
    """
    m = p.model
    b = m.beta
    if v_y <= 0.0:
        return p.v_cc

    def collector(ib: float) -> float:
        ic_sat = (p.v_cc - m.v_ce_sat - ib * p.r_e) / (p.r_c + p.r_e)
        return max(0.0, min(b * ib, ic_sat))

    def loop(ib: float) -> float:
        vbe = VT * math.log1p(b * ib / IS_DIODE)
        return ib * p.r_b + vbe + (ib + collector(ib)) * p.r_e - v_y

    lo, hi = 0.0, v_y / max(p.r_b, p.r_e)
    if loop(hi) < 0:
        raise NoConvergence(f"no bracket for v_y={v_y}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if loop(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 + 1e-13 * hi:
            break
    else:
        raise NoConvergence(f"bisection did not converge for v_y={v_y}")
    ib = 0.5 * (lo + hi)
    return p.v_cc - collector(ib) * p.r_c


# -- non-monotone block ----------------------------------------------------

def nonmonotone_gains(p: NonMonotoneParams) -> tuple[float, float]:
    """Superposition weights of the summing node: (weight of v1, weight of v_y)."""
    den = p.r_s * (p.r_a1 + p.r_a2) + p.r_a1 * p.r_a2
    g2 = p.r_s * p.r_a1 / den  # v1 arrives through r_a2
    g3 = p.r_s * p.r_a2 / den  # v_y arrives through r_a1
    return g2, g3


def nonmonotone_eval(p: NonMonotoneParams, v_y: float) -> float:
    g2, g3 = nonmonotone_gains(p)
    return g2 * saturation_eval(p.sat, v_y) + g3 * v_y


def block_gains(nm: NonMonotoneParams, da: DiffAmpParams, hy: HysteresisParams, v_z: float | None = None) -> Gains:
    g1, vs1 = saturation_gains(nm.sat)
    g2, g3 = nonmonotone_gains(nm)
    g4, g5, d = diffamp_gains(da)
    g6, g7, _ = diffamp_gains(hy.as_diffamp())
    v4_ref = nonmonotone_eval(nm, 0.6)
    vs2 = diffamp_swing(da, v4_ref, v_z if v_z is not None else v4_ref)
    vs3 = hysteresis_corners(hy)[1].output
    vs3 = hy.v_cc - vs3
    return Gains(g1, g2, g3, g4, g5, g6, g7, vs1, vs2, vs3, d)


def nonmonotone_condition(g: Gains) -> bool:
    return g.g1 * g.g2 >= g.g3


def nonmonotone_slope(p: NonMonotoneParams, v_y: float, tol: float = 1e-12) -> GradInterval:
    """Generalized gradient ``g3 - g1 g2 Psi`` of the non-monotone block."""
    g1, vs1 = saturation_gains(p.sat)
    g2, g3 = nonmonotone_gains(p)
    psi = grad_proj(g1 * (v_y - p.sat.model.v_on), PwlInterval(0.0, vs1), tol)
    return psi.scale(-g1 * g2).shift(g3)


def nonmonotone_extrema(p: NonMonotoneParams) -> tuple[BranchPoint, BranchPoint]:
    """Local maximum and minimum of the non-monotone characteristic.

    Both are checked against the non-smooth extremum condition before
    being returned.
    """
    g1, vs1 = saturation_gains(p.sat)
    g2, g3 = nonmonotone_gains(p)
    if not g1 * g2 > g3:
        raise NotNonMonotone(f"g1*g2={g1 * g2:.4g} <= g3={g3:.4g}")
    v_on = p.sat.model.v_on
    y_max = v_on
    y_min = v_on + vs1 / g1
    for y in (y_max, y_min):
        if not contains_zero(nonmonotone_slope(p, y)):
            raise AssertionError(f"extremum condition fails at {y}")
    return (
        BranchPoint(y_max, nonmonotone_eval(p, y_max), "fold"),
        BranchPoint(y_min, nonmonotone_eval(p, y_min), "fold"),
    )


# -- differential amplifier ------------------------------------------------

def diffamp_gains(p: DiffAmpParams) -> tuple[float, float, float]:
    """(g_plus, g_minus, d) of the emitter-coupled pair."""
    b = p.model.beta
    re_bar = (b + 1) * p.r_e_shared
    d = re_bar * (p.r_b2 + p.r_b3) + p.r_b2 * p.r_b3
    rc_bar = b * p.r_c2
    return rc_bar * (re_bar + p.r_b3) / d, rc_bar * re_bar / d, d


def diffamp_base_currents(p: DiffAmpParams, v_plus: float, v_minus: float) -> tuple[float, float]:
    """Base currents with both transistors conducting (may come out negative)."""
    b = p.model.beta
    re_bar = (b + 1) * p.r_e_shared
    _, _, d = diffamp_gains(p)
    a = v_plus - p.model.v_on
    c = v_minus - p.model.v_on
    ib2 = ((re_bar + p.r_b3) * a - re_bar * c) / d
    ib3 = (-re_bar * a + (re_bar + p.r_b2) * c) / d
    return ib2, ib3


def diffamp_swing(p: DiffAmpParams, v_plus: float, v_minus: float) -> float:
    """Output swing ``vs2`` at the operating point of the second transistor."""
    b = p.model.beta
    re_bar = (b + 1) * p.r_e_shared
    rc_bar = b * p.r_c2
    _, ib3 = diffamp_base_currents(p, v_plus, v_minus)
    ib3 = max(ib3, 0.0)
    vs = rc_bar / (re_bar + rc_bar) * (p.v_cc - p.model.v_ce_sat - re_bar * ib3)
    return min(max(vs, 0.0), p.v_cc)


def diffamp_eval(p: DiffAmpParams, v_plus: float, v_minus: float) -> float:
    m = p.model
    g4, g5, _ = diffamp_gains(p)
    ib2, ib3 = diffamp_base_currents(p, v_plus, v_minus)
    re_bar = (m.beta + 1) * p.r_e_shared
    rc3_bar = m.beta * p.r_c3
    if ib3 > 0 and ib2 > 0 and re_bar * ib2 + (rc3_bar + re_bar) * ib3 >= p.v_cc - m.v_ce_sat:
        # second transistor saturated: output pinned above the emitter
        return min(p.v_cc, m.v_ce_sat + re_bar * (ib2 + ib3))
    vs2 = diffamp_swing(p, v_plus, v_minus)
    arg = g4 * (v_plus - m.v_on) - g5 * (v_minus - m.v_on)
    return p.v_cc - proj(arg, PwlInterval(0.0, vs2))


# -- hysteresis block ------------------------------------------------------

def hysteresis_gains(p: HysteresisParams) -> tuple[float, float]:
    g6, g7, _ = diffamp_gains(p.as_diffamp())
    return g6, g7


def hysteresis_corners(p: HysteresisParams) -> tuple[BranchPoint, BranchPoint]:
    """The two fold points of the hysteresis characteristic.

    Upper fold: output at ``v_cc`` with the projection argument at 0.
    Lower fold: output saturated, projection argument at ``vs3``, where
    ``vs3`` follows from the operating point of the feedback transistor at
    that same corner (a 2x2 linear solve, or the cut-off value when that
    transistor carries no base current there).
    """
    m = p.model
    g6, g7 = hysteresis_gains(p)
    von = m.v_on
    v5_up = von + g7 * (p.v_cc - von) / g6
    b = m.beta
    re_bar = (b + 1) * p.r_e_shared
    rc_bar = b * p.r_c_out
    da = p.as_diffamp()
    _, _, d = diffamp_gains(da)
    # unknowns (v5, vs3); vx = v_cc - vs3
    #   g6 (v5 - von) - g7 (v_cc - vs3 - von) - vs3 = 0
    #   vs3 = k (v_cc - v_ce_sat - re_bar * ib_fb(v5, vx))
    # with ib_fb = (-re_bar (v5 - von) + (re_bar + r_b_in)(vx - von)) / d
    k = rc_bar / (re_bar + rc_bar)
    c5 = -re_bar / d
    cx = (re_bar + p.r_b_in) / d
    A = np.array(
        [
            [g6, g7 - 1.0],
            [k * re_bar * c5, 1.0 - k * re_bar * cx],
        ]
    )
    rhs = np.array(
        [
            g6 * von + g7 * (p.v_cc - von),
            k * (p.v_cc - m.v_ce_sat - re_bar * (c5 * (-von) + cx * (p.v_cc - von))),
        ]
    )
    v5_lo, vs3 = np.linalg.solve(A, rhs)
    if c5 * (v5_lo - von) + cx * (p.v_cc - vs3 - von) < 0:
        # feedback transistor is cut off at the lower corner
        vs3 = k * (p.v_cc - m.v_ce_sat)
        v5_lo = von + (g7 * (p.v_cc - vs3 - von) + vs3) / g6
    return (
        BranchPoint(float(v5_up), p.v_cc, "fold"),
        BranchPoint(float(v5_lo), float(p.v_cc - vs3), "fold"),
    )


def _hyst_setup(p: HysteresisParams):
    g6, g7 = hysteresis_gains(p)
    vs3 = p.v_cc - hysteresis_corners(p)[1].output
    return g6, g7, PwlInterval(0.0, vs3)


def hysteresis_residual(p: HysteresisParams, v5: float, vx: float) -> float:
    g6, g7, s3 = _hyst_setup(p)
    von = p.model.v_on
    return vx - p.v_cc + proj(g6 * (v5 - von) - g7 * (vx - von), s3)


def hysteresis_solve(p: HysteresisParams, v5: float, seed: float) -> float:
    """Output ``vx`` on the branch nearest ``seed``."""
    g6, g7, s3 = _hyst_setup(p)
    von = p.model.v_on
    f = lambda a, z: z - p.v_cc + proj(g6 * (a - von) - g7 * (z - von), s3)  # noqa: E731
    kinks = [von + g6 * (v5 - von) / g7, von + (g6 * (v5 - von) - s3.hi) / g7]
    return implicit_solve(f, v5, seed, 0.0, p.v_cc, breakpoints=kinks)


def hysteresis_branches(p: HysteresisParams, v5: float) -> list[BranchPoint]:
    """All roots at input ``v5`` with their stability labels."""
    g6, g7, s3 = _hyst_setup(p)
    von = p.model.v_on
    f = lambda a, z: z - p.v_cc + proj(g6 * (a - von) - g7 * (z - von), s3)  # noqa: E731
    kinks = [von + g6 * (v5 - von) / g7, von + (g6 * (v5 - von) - s3.hi) / g7]
    out = []
    for z in all_roots(f, v5, 0.0, p.v_cc, breakpoints=kinks):
        psi = grad_proj(g6 * (v5 - von) - g7 * (z - von), s3)
        out.append(BranchPoint(v5, z, branch_stability(psi.scale(-g7).shift(1.0))))
    return out


# -- cascade sweep ---------------------------------------------------------

@dataclass(frozen=True)
class Cascade:
    """Non-monotone block, v_z-modulated diff amp and hysteresis in series."""

    nonmono: NonMonotoneParams
    diffamp: DiffAmpParams
    hyst: HysteresisParams

    def with_model(self, model: TransistorModel) -> "Cascade":
        nm = replace(self.nonmono, sat=replace(self.nonmono.sat, model=model))
        return Cascade(nm, replace(self.diffamp, model=model), replace(self.hyst, model=model))


@dataclass
class SweepResult:
    """Branch-resolved static characteristic of one directed sweep."""

    v_z: float
    direction: Literal["up", "down"]
    points: list[BranchPoint]
    branch: list[str]

    @property
    def inputs(self) -> np.ndarray:
        return np.array([p.input for p in self.points])

    @property
    def outputs(self) -> np.ndarray:
        return np.array([p.output for p in self.points])


def mirrored_hysteresis_sweep(
    c: Cascade, v_z: float, v_y_grid, direction: Literal["up", "down"] = "up", seed: float | None = None
) -> SweepResult:
    """Directed continuation sweep of ``v_y -> v_x`` through the cascade."""
    grid = np.asarray(v_y_grid, dtype=float)
    steps = np.diff(grid)
    if direction == "up" and np.any(steps < 0) or direction == "down" and np.any(steps > 0):
        raise ValueError(f"grid is not sorted for a {direction} sweep")
    vcc = c.hyst.v_cc
    vx = vcc if seed is None else seed
    pts, labels = [], []
    for vy in grid:
        v4 = nonmonotone_eval(c.nonmono, float(vy))
        v5 = diffamp_eval(c.diffamp, v4, v_z)
        vx = hysteresis_solve(c.hyst, v5, vx)
        g6, g7, s3 = _hyst_setup(c.hyst)
        von = c.hyst.model.v_on
        psi = grad_proj(g6 * (v5 - von) - g7 * (vx - von), s3)
        pts.append(BranchPoint(float(vy), vx, branch_stability(psi.scale(-g7).shift(1.0))))
        labels.append("upper" if vx > 0.5 * (vcc + vcc - s3.hi) else "lower")
    return SweepResult(v_z, direction, pts, labels)
