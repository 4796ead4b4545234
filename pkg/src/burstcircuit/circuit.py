"""Closed-loop burster configuration and its PWL network template."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .blocks import (
    Cascade,
    DiffAmpParams,
    HysteresisParams,
    NonMonotoneParams,
    SaturationParams,
    TransistorModel,
    linearized_junction,
)
from .network import Npn, PwlNetwork, Resistor

# Node numbering of the reference deck.
VCC = 5
VY = 1
V1 = 2
V4 = 6
V5 = 7
VZ = 12
VX = 13
VCOMP = 16
VO = 18


class TimescaleError(ValueError):
    pass


@dataclass(frozen=True)
class Stimulus:
    """Piecewise-constant applied current: a baseline plus rectangular steps."""

    baseline: float = 0.0
    steps: tuple[tuple[float, float, float], ...] = ()  # (t_on, t_off, amplitude)

    def __call__(self, t: float) -> float:
        out = self.baseline
        for t_on, t_off, amp in self.steps:
            if t_on <= t < t_off:
                out += amp
        return out

    def breakpoints(self) -> list[float]:
        return sorted({t for on, off, _ in self.steps for t in (on, off)})

    def with_step(self, t_on: float, duration: float, amplitude: float) -> "Stimulus":
        return replace(self, steps=self.steps + ((t_on, t_on + duration, amplitude),))


@dataclass(frozen=True)
class CircuitConfig:
    """Component values of the closed-loop burster.

    ``cascade`` holds the non-monotone, diff-amp and hysteresis stages;
    ``r_i1/r_i2/c_i`` the slow v_y filter; ``r_o1/r_o2/c_o`` the ultra-slow
    filter; ``conditioner`` the inverting stage that turns the ultra-slow
    capacitor voltage into v_z. ``c_fast`` is the lumped parasitic at v_x.
    """

    cascade: Cascade
    r_i1: float
    r_i2: float
    c_i: float
    r_o1: float
    r_o2: float
    c_o: float
    conditioner: SaturationParams
    c_fast: float = 1e-9
    v_cc: float = 5.0
    model: TransistorModel = field(default_factory=TransistorModel)
    i_app: Stimulus = field(default_factory=Stimulus)

    @property
    def tau_fast(self) -> float:
        return self.c_fast * self.cascade.hyst.r_c_out

    @property
    def tau_slow(self) -> float:
        return self.c_i * self.r_i1 * self.r_i2 / (self.r_i1 + self.r_i2)

    @property
    def tau_ultra(self) -> float:
        return self.c_o * self.r_o1 * self.r_o2 / (self.r_o1 + self.r_o2)

    def check_timescales(self) -> None:
        if not (self.tau_fast < self.tau_slow / 10 < self.tau_ultra / 100):
            raise TimescaleError(
                f"need tau_fast < tau_slow/10 < tau_ultra/100: "
                f"{self.tau_fast:.3g}, {self.tau_slow:.3g}, {self.tau_ultra:.3g}"
            )

    def with_model(self, model: TransistorModel) -> "CircuitConfig":
        return replace(
            self,
            model=model,
            cascade=self.cascade.with_model(model),
            conditioner=replace(self.conditioner, model=model),
        )

    def with_beta(self, beta: float) -> "CircuitConfig":
        return self.with_model(replace(self.model, beta=beta))

    # -- netlist template ---------------------------------------------------
    def resistors(self) -> list[Resistor]:
        nm, da, hy, cd = self.cascade.nonmono, self.cascade.diffamp, self.cascade.hyst, self.conditioner
        sat = nm.sat
        out = [
            Resistor(VCC, V1, sat.r_c, "rC1"),
            Resistor(3, VY, sat.r_b, "rB1"),
            Resistor(4, 0, sat.r_e, "rE1"),
            Resistor(V4, VY, nm.r_a1, "Ra1"),
            Resistor(V4, V1, nm.r_a2, "Ra2"),
            Resistor(V4, 0, nm.r_s, "Rs"),
            Resistor(V5, VCC, da.r_c2, "rC2"),
            Resistor(10, VCC, da.r_c3, "rC3"),
            Resistor(8, V4, da.r_b2, "rB2"),
            Resistor(VZ, 11, da.r_b3, "rB3"),
            Resistor(9, 0, da.r_e_shared, "rE2"),
            Resistor(VX, VCC, hy.r_c_out, "rC4"),
            Resistor(VCOMP, VCC, hy.r_c_comp, "rC5"),
            Resistor(14, V5, hy.r_b_in, "rB4"),
            Resistor(17, VX, hy.r_b_fb, "rB5"),
            Resistor(15, 0, hy.r_e_shared, "rE4"),
            Resistor(VX, VY, self.r_i1, "ri1"),
            Resistor(VY, 0, self.r_i2, "ri2"),
            Resistor(VCOMP, VO, self.r_o1, "ro1"),
            Resistor(VO, 0, self.r_o2, "ro2"),
            Resistor(VZ, VCC, cd.r_c, "rC6"),
            Resistor(19, 0, cd.r_e, "rE6"),
        ]
        if cd.r_bias is not None:
            out.append(Resistor(19, VCC, cd.r_bias, "rbi"))
        if cd.r_b > 0:
            raise NotImplementedError("conditioner base resistor is not part of the template")
        return out

    def npns(self) -> list[Npn]:
        return [
            Npn(V1, 3, 4, "q1"),
            Npn(V5, 8, 9, "q2"),
            Npn(10, 11, 9, "q3"),
            Npn(VX, 14, 15, "q4"),
            Npn(VCOMP, 17, 15, "q5"),
            Npn(VZ, VO, 19, "q6"),
        ]

    def network(self, driven: Sequence[int], injections: Sequence[int] = (VO,)) -> PwlNetwork:
        return PwlNetwork(self.resistors(), self.npns(), list(driven), list(injections), self.model)


def reference_config(r_i2: float = 47e3, model: TransistorModel | None = None, c_fast: float = 1e-9) -> CircuitConfig:
    """Component values of the reference deck (``r_i2 = 34.5k`` gives tonic spiking).

    The default transistor is the junction linearized at 1 mA; the bare
    0.6 V switch leaves this deck at rest.
    """
    model = model or linearized_junction()
    sat = SaturationParams(r_b=100e3, r_c=16e3, r_e=10e3, model=model)
    cascade = Cascade(
        NonMonotoneParams(sat, r_a1=100e3, r_a2=33e3, r_s=220e3),
        DiffAmpParams(r_b2=1e3, r_b3=1.2e3, r_e_shared=470, r_c2=4.7e3, r_c3=4.7e3, model=model),
        HysteresisParams(r_c_out=820, r_c_comp=240, r_b_in=2.4e3, r_b_fb=6e3, r_e_shared=240, model=model),
    )
    return CircuitConfig(
        cascade=cascade,
        r_i1=15e3,
        r_i2=r_i2,
        c_i=22e-9,
        r_o1=4.7e3,
        r_o2=4.7e3,
        c_o=4.7e-6,
        conditioner=SaturationParams(r_b=0.0, r_c=200, r_e=20, r_bias=150, model=model),
        c_fast=c_fast,
        model=model,
    )
