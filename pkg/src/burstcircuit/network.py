"""Piecewise-linear DC solver for resistor/NPN networks.

Each NPN is one of three affine devices:

* ``OFF``: no base or collector current.
* ``ACTIVE``: base-emitter junction is a ``v_on`` source behind ``r_e``,
  collector current is ``beta * i_b``.
* ``SAT``: same junction, collector-emitter held at ``v_ce_sat``.

For a fixed region tuple the network equations are linear, so every
node voltage, device current and region margin is an affine function of the
input vector ``u`` (voltages at driven nodes followed by injected currents).
Region maps are cached, which makes repeated solves and the exact
piecewise-affine integrator in :mod:`burstcircuit.engine` cheap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .blocks import TransistorModel

OFF, ACTIVE, SAT = 0, 1, 2
REGION_NAMES = {OFF: "off", ACTIVE: "active", SAT: "sat"}

# Current margins are scaled to volts so one tolerance fits every margin.
R_REF = 1e3


class NoConsistentRegion(RuntimeError):
    """No transistor region assignment satisfies its own validity margins."""


@dataclass(frozen=True)
class Resistor:
    a: int
    b: int
    r: float
    name: str = ""


@dataclass(frozen=True)
class Npn:
    c: int
    b: int
    e: int
    name: str = ""


@dataclass
class RegionMap:
    """Affine maps valid inside one region tuple.

    ``x = P @ u + q`` for the unknowns, ``margins = M @ u + m`` (all must be
    >= 0 for the region to be valid), ``V @ u + v`` for node voltages and
    ``I @ u + i`` for the current the network delivers into each driven node.
    """

    regions: tuple[int, ...]
    P: np.ndarray
    q: np.ndarray
    M: np.ndarray
    m: np.ndarray
    flips: list[tuple[int, int]]  # (device, region to move to) per margin row
    V: np.ndarray
    v: np.ndarray
    I: np.ndarray
    i: np.ndarray


@dataclass
class PwlNetwork:
    """Resistor/NPN network with driven nodes and current injections.

    Parameters
    ----------
    resistors, npns
        Circuit elements. Node 0 is ground.
    driven
        Nodes whose voltage is an input.
    injections
        Nodes receiving an injected current input (positive = into node).
    model
        Transistor abstraction shared by all devices.
    """

    resistors: Sequence[Resistor]
    npns: Sequence[Npn]
    driven: Sequence[int]
    injections: Sequence[int] = ()
    model: TransistorModel = field(default_factory=TransistorModel)

    def __post_init__(self):
        nodes = {0}
        for r in self.resistors:
            nodes |= {r.a, r.b}
        for q in self.npns:
            nodes |= {q.c, q.b, q.e}
        nodes |= set(self.injections)
        self.driven = list(self.driven)
        self.injections = list(self.injections)
        self.nodes = sorted(nodes)
        self.free = [n for n in self.nodes if n != 0 and n not in self.driven]
        self._fidx = {n: i for i, n in enumerate(self.free)}
        self._didx = {n: i for i, n in enumerate(self.driven)}
        self.n_free = len(self.free)
        self.n_q = len(self.npns)
        self.n_x = self.n_free + 2 * self.n_q
        self.n_u = len(self.driven) + len(self.injections)
        self._cache: dict[tuple[int, ...], RegionMap] = {}
        self._build_linear_part()

    # -- assembly ---------------------------------------------------------
    def _build_linear_part(self):
        nf, nu = self.n_free, self.n_u
        A = np.zeros((self.n_x, self.n_x))
        B = np.zeros((self.n_x, nu))
        for r in self.resistors:
            g = 1.0 / r.r
            for p, o in ((r.a, r.b), (r.b, r.a)):
                if p in self._fidx:
                    i = self._fidx[p]
                    A[i, i] += g
                    if o in self._fidx:
                        A[i, self._fidx[o]] -= g
                    elif o in self._didx:
                        B[i, self._didx[o]] += g
        for k, q in enumerate(self.npns):
            ib, ic = nf + 2 * k, nf + 2 * k + 1
            if q.b in self._fidx:
                A[self._fidx[q.b], ib] += 1.0
            if q.c in self._fidx:
                A[self._fidx[q.c], ic] += 1.0
            if q.e in self._fidx:
                A[self._fidx[q.e], ib] -= 1.0
                A[self._fidx[q.e], ic] -= 1.0
        for j, n in enumerate(self.injections):
            if n in self._fidx:
                B[self._fidx[n], len(self.driven) + j] += 1.0
        self._A0, self._B0 = A, B

        # node voltages as linear functionals of (x, u)
        nn = len(self.nodes)
        self._node_pos = {n: i for i, n in enumerate(self.nodes)}
        Vx = np.zeros((nn, self.n_x))
        Vu = np.zeros((nn, nu))
        for n, i in self._node_pos.items():
            if n in self._fidx:
                Vx[i, self._fidx[n]] = 1.0
            elif n in self._didx:
                Vu[i, self._didx[n]] = 1.0
        self._Vx, self._Vu = Vx, Vu

        # network current into each driven node
        nd = len(self.driven)
        Ix = np.zeros((nd, self.n_x))
        Iu = np.zeros((nd, nu))
        for r in self.resistors:
            g = 1.0 / r.r
            for p, o in ((r.a, r.b), (r.b, r.a)):
                if p in self._didx:
                    row = self._didx[p]
                    Ix[row] += g * Vx[self._node_pos[o]]
                    Iu[row] += g * Vu[self._node_pos[o]]
                    Iu[row, row] -= g
        for k, q in enumerate(self.npns):
            ib, ic = nf + 2 * k, nf + 2 * k + 1
            if q.b in self._didx:
                Ix[self._didx[q.b], ib] -= 1.0
            if q.c in self._didx:
                Ix[self._didx[q.c], ic] -= 1.0
            if q.e in self._didx:
                Ix[self._didx[q.e], ib] += 1.0
                Ix[self._didx[q.e], ic] += 1.0
        self._Ix, self._Iu = Ix, Iu

    def _vrow(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if n == 0:
            return np.zeros(self.n_x), np.zeros(self.n_u)
        i = self._node_pos[n]
        return self._Vx[i], self._Vu[i]

    def region_map(self, regions: tuple[int, ...]) -> RegionMap:
        rm = self._cache.get(regions)
        if rm is not None:
            return rm
        mdl = self.model
        nf = self.n_free
        A = self._A0.copy()
        B = self._B0.copy()
        d = np.zeros(self.n_x)
        Mx, Mu, mc, flips = [], [], [], []
        for k, (q, reg) in enumerate(zip(self.npns, regions)):
            r1 = nf + 2 * k
            r2 = r1 + 1
            ib, ic = r1, r2
            bx, bu = self._vrow(q.b)
            cx, cu = self._vrow(q.c)
            ex, eu = self._vrow(q.e)
            if reg == OFF:
                A[r1, ib] = 1.0
                A[r2, ic] = 1.0
                # margin: v_on - v_be >= 0
                Mx.append(-(bx - ex))
                Mu.append(-(bu - eu))
                mc.append(mdl.v_on)
                flips.append((k, ACTIVE))
                continue
            # v_b - v_e - r_e (i_b + i_c) = v_on
            A[r1] += bx - ex
            B[r1] -= bu - eu
            A[r1, ib] -= mdl.r_e
            A[r1, ic] -= mdl.r_e
            d[r1] = mdl.v_on
            e_ib = np.zeros(self.n_x)
            e_ib[ib] = R_REF
            Mx.append(e_ib)
            Mu.append(np.zeros(self.n_u))
            mc.append(0.0)
            flips.append((k, OFF))
            if reg == ACTIVE:
                A[r2, ic] = 1.0
                A[r2, ib] = -mdl.beta
                # margin: v_ce - v_ce_sat >= 0
                Mx.append(cx - ex)
                Mu.append(cu - eu)
                mc.append(-mdl.v_ce_sat)
                flips.append((k, SAT))
            else:
                A[r2] += cx - ex
                B[r2] -= cu - eu
                d[r2] = mdl.v_ce_sat
                # margin: beta i_b - i_c >= 0
                row = np.zeros(self.n_x)
                row[ib] = mdl.beta * R_REF
                row[ic] = -R_REF
                Mx.append(row)
                Mu.append(np.zeros(self.n_u))
                mc.append(0.0)
                flips.append((k, ACTIVE))
        Ainv = np.linalg.inv(A)
        P = Ainv @ B
        qv = Ainv @ d
        Mx = np.array(Mx).reshape(-1, self.n_x)
        Mu = np.array(Mu).reshape(-1, self.n_u)
        rm = RegionMap(
            regions=regions,
            P=P,
            q=qv,
            M=Mx @ P + Mu,
            m=Mx @ qv + np.array(mc),
            flips=flips,
            V=self._Vx @ P + self._Vu,
            v=self._Vx @ qv,
            I=self._Ix @ P + self._Iu,
            i=self._Ix @ qv,
        )
        self._cache[regions] = rm
        return rm

    # -- solving ----------------------------------------------------------
    def consistent(self, regions: tuple[int, ...], u: np.ndarray, tol: float = 1e-9) -> bool:
        rm = self.region_map(regions)
        return bool(np.all(rm.M @ u + rm.m >= -tol))

    def solve(
        self, u: np.ndarray, regions: tuple[int, ...] | None = None, tol: float = 1e-9
    ) -> tuple[tuple[int, ...], RegionMap]:
        """Find a consistent region tuple for input ``u``.

        Starts from ``regions`` (default: all active) and flips the single
        most violated device each round; falls back to exhaustive
        enumeration if that cycles.
        """
        u = np.asarray(u, dtype=float)
        reg = tuple(regions) if regions is not None else (ACTIVE,) * self.n_q
        seen = set()
        for _ in range(4 * self.n_q + 10):
            rm = self.region_map(reg)
            marg = rm.M @ u + rm.m
            worst = int(np.argmin(marg)) if marg.size else 0
            if not marg.size or marg[worst] >= -tol:
                return reg, rm
            seen.add(reg)
            k, target = rm.flips[worst]
            nxt = reg[:k] + (target,) + reg[k + 1:]
            if nxt in seen:
                break
            reg = nxt
        best = None
        for cand in itertools.product((OFF, ACTIVE, SAT), repeat=self.n_q):
            rm = self.region_map(cand)
            marg = rm.M @ u + rm.m
            worst = marg.min() if marg.size else 0.0
            if worst >= -tol:
                return cand, rm
            if best is None or worst > best[0]:
                best = (worst, cand)
        raise NoConsistentRegion(f"no consistent region (closest {best[1]}, margin {best[0]:.3g})")

    def node_voltages(self, u: np.ndarray, regions: tuple[int, ...] | None = None) -> dict[int, float]:
        u = np.asarray(u, dtype=float)
        _, rm = self.solve(u, regions)
        vals = rm.V @ u + rm.v
        return {n: float(vals[i]) for i, n in enumerate(self.nodes)}
