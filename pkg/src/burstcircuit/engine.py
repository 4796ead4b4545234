"""Closed-loop circuit dynamics with exact piecewise-affine integration.

Inside a fixed transistor-region tuple the capacitor currents are affine in
the capacitor voltages, so the state obeys ``ds/dt = A s + b`` and is
propagated exactly with a matrix exponential. Region margins are affine in
the state too; a sign change is bracketed on the output grid and bisected
to ``t_tol`` before the region is switched.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.linalg import expm

from .circuit import VCOMP, VO, VX, VY, VZ, CircuitConfig, Stimulus
from .network import ACTIVE, OFF, SAT, PwlNetwork, RegionMap

log = logging.getLogger(__name__)

EventKind = Literal["spike_onset", "spike_peak", "region_crossing"]


class StepFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class CircuitState:
    """Capacitor voltages: fast v_x, slow v_y, ultra-slow filter v_z."""

    v_x: float
    v_y: float
    v_z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v_x, self.v_y, self.v_z])


@dataclass
class Trace:
    """Sampled trajectory.

    ``states`` has one column per entry of ``names``; ``aux`` holds derived
    node voltages sampled at the same times.
    """

    times: np.ndarray
    states: np.ndarray
    names: tuple[str, ...] = ("vx", "vy", "vz")
    events: list[tuple[float, str]] = field(default_factory=list)
    aux: dict[str, np.ndarray] = field(default_factory=dict)
    tau_fast: float | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        if name in self.names:
            return self.states[:, self.names.index(name)]
        return self.aux[name]

    def __len__(self) -> int:
        return len(self.times)

    def window(self, t_start: float, t_stop: float = np.inf) -> "Trace":
        sel = (self.times >= t_start) & (self.times <= t_stop)
        return Trace(
            self.times[sel],
            self.states[sel],
            self.names,
            [e for e in self.events if t_start <= e[0] <= t_stop],
            {k: v[sel] for k, v in self.aux.items()},
            self.tau_fast,
        )


class CircuitSystem:
    """Capacitor-node dynamics of a :class:`CircuitConfig`.

    With ``frozen_vz`` set, the v_z node is driven by that voltage and the
    ultra-slow loop is open; the state is then ``(v_x, v_y)``.
    """

    def __init__(self, cfg: CircuitConfig, frozen_vz: float | None = None):
        self.cfg = cfg
        self.frozen_vz = frozen_vz
        if frozen_vz is None:
            self.state_nodes = [VX, VY, VO]
            self.caps = np.array([cfg.c_fast, cfg.c_i, cfg.c_o])
            driven = [5] + self.state_nodes
        else:
            self.state_nodes = [VX, VY]
            self.caps = np.array([cfg.c_fast, cfg.c_i])
            driven = [5] + self.state_nodes + [VZ]
        self.net: PwlNetwork = cfg.network(driven, injections=[VO])
        m = len(self.state_nodes)
        n_u = self.net.n_u
        # u = E s + W @ (v_cc, v_frozen, i_app)
        self.E = np.zeros((n_u, m))
        for k in range(m):
            self.E[1 + k, k] = 1.0
        self.W = np.zeros((n_u, 3))
        self.W[0, 0] = 1.0
        if frozen_vz is not None:
            self.W[1 + m, 1] = 1.0
        self.W[n_u - 1, 2] = 1.0
        self.inj_direct = np.zeros((m, 3))
        if VO in self.state_nodes:
            self.inj_direct[self.state_nodes.index(VO), 2] = 1.0
        self._rows = [self.net.driven.index(n) for n in self.state_nodes]
        self._affine_cache: dict = {}
        self._expm_cache: dict = {}

    @property
    def dim(self) -> int:
        return len(self.state_nodes)

    def inputs(self, s: np.ndarray, i_app: float) -> np.ndarray:
        w = np.array([self.cfg.v_cc, self.frozen_vz or 0.0, i_app])
        return self.E @ s + self.W @ w

    def regions_at(self, s: np.ndarray, i_app: float = 0.0, start=None) -> tuple[int, ...]:
        reg, _ = self.net.solve(self.inputs(s, i_app), start)
        return reg

    def affine(self, reg: tuple[int, ...], i_app: float):
        """``(A, b, Ms, ms)`` with ``ds/dt = A s + b`` and margins ``Ms s + ms``."""
        key = (reg, i_app)
        hit = self._affine_cache.get(key)
        if hit is not None:
            return hit
        rm: RegionMap = self.net.region_map(reg)
        w = np.array([self.cfg.v_cc, self.frozen_vz or 0.0, i_app])
        cinv = 1.0 / self.caps
        Is, i_s = rm.I[self._rows], rm.i[self._rows]
        A = cinv[:, None] * (Is @ self.E)
        b = cinv * (Is @ (self.W @ w) + i_s + self.inj_direct @ w)
        Ms = rm.M @ self.E
        ms = rm.M @ (self.W @ w) + rm.m
        out = (A, b, Ms, ms)
        self._affine_cache[key] = out
        return out

    def rhs(self, s: np.ndarray, t: float = 0.0, reg=None) -> np.ndarray:
        i_app = self.cfg.i_app(t)
        reg = self.regions_at(np.asarray(s, float), i_app, reg)
        A, b, _, _ = self.affine(reg, i_app)
        return A @ s + b

    def node_voltages(self, s: np.ndarray, t: float = 0.0, nodes=(VZ, VCOMP)) -> dict[int, float]:
        u = self.inputs(np.asarray(s, float), self.cfg.i_app(t))
        v = self.net.node_voltages(u)
        return {n: v[n] for n in nodes}

    def propagator(self, reg, i_app: float, dt: float, cache: bool = True) -> np.ndarray:
        key = (reg, i_app, dt)
        if cache:
            hit = self._expm_cache.get(key)
            if hit is not None:
                return hit
        A, b, _, _ = self.affine(reg, i_app)
        m = self.dim
        M = np.zeros((m + 1, m + 1))
        M[:m, :m] = A
        M[:m, m] = b
        P = expm(M * dt)
        if cache:
            if len(self._expm_cache) > 20000:
                self._expm_cache.clear()
            self._expm_cache[key] = P
        return P


def circuit_rhs(s: CircuitState, c: CircuitConfig, t: float = 0.0) -> tuple[float, float, float]:
    """Time derivatives of the three capacitor voltages."""
    d = CircuitSystem(c).rhs(s.as_array(), t)
    return float(d[0]), float(d[1]), float(d[2])


def integrate_system(
    sys: CircuitSystem,
    s0,
    t_end: float,
    dt_max: float = 5e-7,
    t_tol: float = 1e-12,
    margin_tol: float = 1e-9,
    t0: float = 0.0,
    aux_nodes: dict[str, int] | None = None,
    max_events_per_step: int = 200,
) -> Trace:
    """Event-exact integration on a uniform output grid of spacing ``dt_max``."""
    stim: Stimulus = sys.cfg.i_app
    s = np.array(s0, dtype=float)
    m = sys.dim
    t = t0
    n_steps = int(np.ceil((t_end - t0) / dt_max - 1e-9))
    grid = t0 + dt_max * np.arange(n_steps + 1)
    grid[-1] = t_end
    breaks = [b for b in stim.breakpoints() if t0 < b < t_end]
    i_app = stim(t)
    reg = sys.regions_at(s, i_app)
    out = np.empty((n_steps + 1, m))
    out[0] = s
    regs_out = [reg]
    events: list[tuple[float, str]] = []
    k = 1
    bi = 0
    stuck = 0
    while k <= n_steps:
        target = grid[k]
        is_break = bi < len(breaks) and breaks[bi] <= target
        if is_break:
            target = breaks[bi]
        dt = target - t
        on_grid = (not is_break) and abs(dt - dt_max) < 1e-15
        if dt > 0:
            P = sys.propagator(reg, i_app, dt_max if on_grid else dt, cache=on_grid)
            s_new = P[:m, :m] @ s + P[:m, m]
            _, _, Ms, ms = sys.affine(reg, i_app)
            marg = Ms @ s_new + ms
        else:
            s_new, marg = s, np.zeros(1)
        if marg.min() >= -margin_tol:
            t, s = target, s_new
            stuck = 0
            if is_break:
                bi += 1
                i_app = stim(t)
                reg = sys.regions_at(s, i_app, reg)
                if abs(target - grid[k]) < 1e-15:
                    out[k] = s
                    regs_out.append(reg)
                    k += 1
            else:
                out[k] = s
                regs_out.append(reg)
                k += 1
            continue
        # locate the first margin crossing inside (t, target]
        lo, hi = 0.0, dt
        s_hi = s_new
        while hi - lo > t_tol:
            mid = 0.5 * (lo + hi)
            P = sys.propagator(reg, i_app, mid, cache=False)
            s_mid = P[:m, :m] @ s + P[:m, m]
            if (Ms @ s_mid + ms).min() >= -margin_tol:
                lo = mid
            else:
                hi, s_hi = mid, s_mid
        worst = int(np.argmin(Ms @ s_hi + ms))
        rm = sys.net.region_map(reg)
        dev, new_region = rm.flips[worst]
        start = reg[:dev] + (new_region,) + reg[dev + 1:]
        t = t + hi
        s = s_hi
        reg = sys.regions_at(s, i_app, start)
        events.append((t, "region_crossing"))
        stuck += 1
        if stuck > max_events_per_step:
            raise StepFailure(f"event chattering near t={t:.9g}")
    tr = Trace(grid, out, ("vx", "vy", "vz")[:m], events, tau_fast=sys.cfg.tau_fast)
    if aux_nodes:
        for name, node in aux_nodes.items():
            vals = np.empty(len(grid))
            for j, (sj, rj) in enumerate(zip(out, regs_out)):
                u = sys.inputs(sj, stim(grid[j]))
                rm = sys.net.region_map(rj)
                vals[j] = rm.V[sys.net.nodes.index(node)] @ u + rm.v[sys.net.nodes.index(node)]
            tr.aux[name] = vals
    return tr


class NotAtRest(RuntimeError):
    pass


class NoTransition(RuntimeError):
    pass


@dataclass(frozen=True)
class Equilibrium:
    state: np.ndarray
    regions: tuple[int, ...]
    eigenvalues: np.ndarray

    @property
    def stable(self) -> bool:
        return bool(self.eigenvalues.real.max() < 0)


def equilibria(sys: CircuitSystem, i_app: float = 0.0, tol: float = 1e-9) -> list[Equilibrium]:
    """All equilibria, by solving the affine steady state in every region tuple."""
    out = []
    for reg in itertools.product((OFF, ACTIVE, SAT), repeat=sys.net.n_q):
        A, b, Ms, ms = sys.affine(reg, i_app)
        try:
            s = np.linalg.solve(A, -b)
        except np.linalg.LinAlgError:
            continue
        if (Ms @ s + ms).min() >= -tol:
            if not any(np.allclose(s, e.state, atol=1e-9) for e in out):
                out.append(Equilibrium(s, reg, np.linalg.eigvals(A)))
    return out


def track_equilibrium(
    sys: CircuitSystem, s_guess: np.ndarray, regions=None, i_app: float = 0.0, tol: float = 1e-9
) -> Equilibrium | None:
    """Equilibrium reached by region flipping from a nearby guess; None if it has vanished."""
    reg = tuple(regions) if regions is not None else sys.regions_at(s_guess, i_app)
    seen = set()
    for _ in range(4 * sys.net.n_q + 10):
        A, b, Ms, ms = sys.affine(reg, i_app)
        s = np.linalg.solve(A, -b)
        marg = Ms @ s + ms
        w = int(np.argmin(marg))
        if marg[w] >= -tol:
            return Equilibrium(s, reg, np.linalg.eigvals(A))
        seen.add(reg)
        k, target = sys.net.region_map(reg).flips[w]
        reg = reg[:k] + (target,) + reg[k + 1:]
        if reg in seen:
            return None
    return None


def operating_point(c: CircuitConfig, kick: float = 1e-3) -> CircuitState:
    """DC operating point with ``v_x`` nudged by ``kick`` volts.

    A transient analysis starts from the DC solution; when that solution is
    unstable the nudge selects a deterministic departure.
    """
    eqs = equilibria(CircuitSystem(c), c.i_app(0.0))
    if not eqs:
        raise NotAtRest("no DC operating point")
    s = eqs[0].state
    return CircuitState(float(s[0] + kick), float(s[1]), float(s[2]))


def default_initial_state(cfg: CircuitConfig) -> CircuitState:
    return operating_point(cfg)


def circuit_integrate(
    s0: CircuitState | None,
    c: CircuitConfig,
    t_end: float,
    dt_max: float = 5e-7,
    t_tol: float = 1e-12,
    aux: bool = False,
) -> Trace:
    """Integrate the closed loop from ``s0`` for ``t_end`` seconds."""
    sys = CircuitSystem(c)
    s0 = s0 or default_initial_state(c)
    nodes = {"vz_drive": VZ, "vcomp": VCOMP} if aux else None
    return integrate_system(sys, s0.as_array(), t_end, dt_max, t_tol, aux_nodes=nodes)


# -- frozen-v_z experiments --------------------------------------------------

def frozen_run(c: CircuitConfig, vz: float, s0, t_settle: float = 4e-3, dt_max: float = 5e-7) -> tuple[bool, np.ndarray]:
    """Run the open-loop fast/slow pair at fixed ``vz``; report (oscillating, final state).

    Oscillation means a v_x swing above 1 V over the second half of the run.
    """
    tr = integrate_system(CircuitSystem(c, frozen_vz=vz), s0, t_settle, dt_max)
    vx = tr["vx"][len(tr) // 2:]
    return bool(vx.max() - vx.min() > 1.0), tr.states[-1]


def _cycle_seed(c: CircuitConfig, vz: float) -> np.ndarray:
    sys = CircuitSystem(c, frozen_vz=vz)
    unstable = [e for e in equilibria(sys) if not e.stable]
    if unstable:
        s = unstable[0].state.copy()
        s[0] += 1e-3
        return s
    return np.array([0.5 * c.v_cc, 0.5 * c.v_cc])


@dataclass(frozen=True)
class ZHysteresis:
    vz_up: float
    vz_down: float
    rest_state: np.ndarray

    @property
    def width(self) -> float:
        return self.vz_up - self.vz_down


def z_transition_scan(c: CircuitConfig, vz_grid, t_settle: float = 4e-3, stride: int = 5) -> ZHysteresis:
    """Quasi-static v_z ramp with the ultra-slow loop open.

    Ramping down from the top of the grid, the limit cycle is followed
    until it collapses onto a node (``vz_down``); ramping back up, that node
    is followed as an exact equilibrium until it vanishes or loses
    stability (``vz_up``). Each transition is placed midway between the
    two grid points that bracket it.
    """
    g = np.sort(np.asarray(vz_grid, dtype=float))
    n = len(g)
    if n < 2:
        raise NoTransition("grid needs at least two points")
    on, s = frozen_run(c, g[-1], _cycle_seed(c, g[-1]), t_settle)
    if not on:
        raise NoTransition(f"no limit cycle at the top of the grid ({g[-1]:.3g} V)")
    i = n - 1
    while i - stride >= 0:
        on, s_new = frozen_run(c, g[i - stride], s, t_settle)
        if not on:
            break
        i, s = i - stride, s_new
    i_off = None
    for j in range(i - 1, -1, -1):
        on, s_new = frozen_run(c, g[j], s, t_settle)
        if not on:
            i_off, rest = j, s_new
            break
        s = s_new
    if i_off is None:
        raise NoTransition("limit cycle persists over the whole grid")
    vz_down = 0.5 * (g[i_off] + g[i_off + 1])
    sys = CircuitSystem(c, frozen_vz=g[i_off])
    eq = track_equilibrium(sys, rest)
    if eq is None or not eq.stable:
        raise NoTransition(f"ramp did not settle on a stable node at {g[i_off]:.3g} V")
    rest_state = eq.state
    s, reg = eq.state, eq.regions
    for j in range(i_off + 1, n):
        eq = track_equilibrium(CircuitSystem(c, frozen_vz=g[j]), s, reg)
        if eq is None or not eq.stable:
            return ZHysteresis(0.5 * (g[j - 1] + g[j]), vz_down, rest_state)
        s, reg = eq.state, eq.regions
    raise NoTransition("node persists over the whole grid")


def z_transition_hysteresis(c: CircuitConfig, vz_grid, t_settle: float = 4e-3) -> tuple[float, float]:
    """``(vz_up, vz_down)``: node-to-cycle and cycle-to-node transitions."""
    z = z_transition_scan(c, vz_grid, t_settle)
    return z.vz_up, z.vz_down


def attractor_census(c: CircuitConfig, vz: float, n_side: int = 3, t_settle: float = 4e-3) -> dict[str, int]:
    """Count cycle/node outcomes from a grid of initial (v_x, v_y) states."""
    out = {"cycle": 0, "node": 0}
    lo, hi = 0.5, c.v_cc - 0.1
    for vx0 in np.linspace(lo, hi, n_side):
        for vy0 in np.linspace(lo, hi, n_side):
            on, _ = frozen_run(c, vz, np.array([vx0, vy0]), t_settle)
            out["cycle" if on else "node"] += 1
    return out


# -- excitability ------------------------------------------------------------

@dataclass(frozen=True)
class Response:
    amplitude: float
    response_duration: float
    mean_spike_frequency: float
    n_spikes: int


def rest_state(c: CircuitConfig) -> Equilibrium | None:
    stable = [e for e in equilibria(CircuitSystem(c), c.i_app(0.0)) if e.stable]
    return stable[0] if stable else None


def holding_current(c: CircuitConfig, i_max: float = 1e-3, rel_tol: float = 1e-3) -> float:
    """Smallest positive baseline current that gives a stable resting state."""
    from dataclasses import replace

    def at_rest(i: float) -> bool:
        return rest_state(replace(c, i_app=Stimulus(i))) is not None

    if at_rest(0.0):
        return 0.0
    lo, hi = 0.0, 1e-6
    while not at_rest(hi):
        lo, hi = hi, 2 * hi
        if hi > i_max:
            raise NotAtRest("no holding current up to i_max")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if at_rest(mid):
            hi = mid
        else:
            lo = mid
    return hi


# Rest and spiking coexist up to about 1.2x the holding current in the
# tonic configuration, so tonic runs sit further from threshold.
BASELINE_FACTOR = {"tonic": 1.3, "bursting": 1.05}


def excitability_experiment(
    c: CircuitConfig,
    mode: Literal["tonic", "bursting"],
    step_amplitudes,
    step_duration: float,
    baseline: float | None = None,
    t_pre: float = 1e-3,
    t_post: float | None = None,
    dt_max: float = 5e-7,
) -> list[Response]:
    """Responses of a resting circuit to rectangular current steps.

    ``baseline`` defaults to a mode-dependent multiple of the holding
    current (see ``BASELINE_FACTOR``). Negative steps excite. The response
    duration runs from the first to the last spike.
    """
    from dataclasses import replace

    from .spikes import detect_spikes

    if baseline is None:
        baseline = BASELINE_FACTOR[mode] * holding_current(c)
    base = replace(c, i_app=Stimulus(baseline))
    eq = rest_state(base)
    if eq is None:
        raise NotAtRest(f"baseline {baseline:.3g} A leaves no stable rest state")
    if t_post is None:
        t_post = 4 * c.tau_ultra
    out = []
    sys0 = CircuitSystem(base)
    for amp in step_amplitudes:
        cfg = replace(c, i_app=Stimulus(baseline).with_step(t_pre, step_duration, amp))
        sys = CircuitSystem(cfg)
        sys._affine_cache = sys0._affine_cache
        tr = integrate_system(sys, eq.state, t_pre + step_duration + t_post, dt_max)
        vx = tr["vx"]
        if vx.max() - vx.min() < 1.0:
            ts = np.empty(0)
        else:
            ts = detect_spikes(tr.times, -vx, 20 * c.tau_fast)
        if len(ts) == 0:
            out.append(Response(amp, 0.0, 0.0, 0))
            continue
        dur = float(ts[-1] - ts[0])
        freq = (len(ts) - 1) / dur if len(ts) > 1 else 0.0
        out.append(Response(amp, dur, freq, len(ts)))
        log.info("%s amp=%.3g: %d spikes over %.3g s", mode, amp, len(ts), dur)
    return out
