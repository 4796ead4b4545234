"""Three-timescale polynomial normal form of tonic spiking and bursting."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .engine import StepFailure, Trace


@dataclass(frozen=True)
class NormalFormParams:
    """Parameters of the normal form.

    ``lam`` is the bifurcation parameter, ``alpha`` and ``beta_u`` the
    unfolding parameters, ``eps_s``/``eps_u`` the slow and ultra-slow rates
    and ``u`` the external input.
    """

    lam: float = 0.0
    alpha: float = 0.0
    beta_u: float = 0.0
    eps_s: float = 0.05
    eps_u: float = 0.005
    u: float = 0.0

    def __post_init__(self):
        if not (0 <= self.eps_u <= self.eps_s / 10 <= 0.01 and self.eps_s > 0):
            raise ValueError(f"need 0 <= eps_u <= eps_s/10 <= 1/100, got eps_s={self.eps_s}, eps_u={self.eps_u}")

    def with_input(self, u: float) -> "NormalFormParams":
        return replace(self, u=u)


@dataclass(frozen=True)
class NfState:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


# Relaxation time of x; sets the spike refractory window.
NF_TAU_FAST = 0.25

# Found by scripts/search_nf_presets.py on a 0.25 grid of (lam, alpha, beta_u).
PRESETS: dict[str, NormalFormParams] = {
    "nf-tonic": NormalFormParams(lam=0.75, alpha=0.0, beta_u=1.0, eps_s=0.05, eps_u=0.005),
    "nf-burst": NormalFormParams(lam=0.25, alpha=0.0, beta_u=0.5, eps_s=0.05, eps_u=0.001),
}


def _f(s: np.ndarray, p: NormalFormParams) -> np.ndarray:
    x, y, z = s
    return np.array(
        [
            -(x**3) - (p.lam + y) ** 2 + p.beta_u * x - (p.alpha + p.u) - z,
            p.eps_s * (x - y),
            p.eps_u * (x - z),
        ]
    )


def nf_rhs(s: NfState, p: NormalFormParams) -> tuple[float, float, float]:
    dx, dy, dz = _f(s.as_array(), p)
    return float(dx), float(dy), float(dz)


def nf_jacobian(s: NfState, p: NormalFormParams) -> np.ndarray:
    return np.array(
        [
            [-3 * s.x**2 + p.beta_u, -2 * (p.lam + s.y), -1.0],
            [p.eps_s, -p.eps_s, 0.0],
            [p.eps_u, 0.0, -p.eps_u],
        ]
    )


@dataclass(frozen=True)
class CubicRoot:
    x: float
    multiplicity: int


def _polish(x: float, p_: float, q: float, mult: int) -> float:
    # Newton on the cubic for simple roots, on its derivative for double roots
    for _ in range(4):
        if mult == 1:
            f, df = x**3 + p_ * x + q, 3 * x**2 + p_
        else:
            f, df = 3 * x**2 + p_, 6 * x
        if df == 0:
            break
        x -= f / df
    return x


def critical_manifold_roots(y: float, z: float, p: NormalFormParams, rel_tol: float = 1e-12) -> list[CubicRoot]:
    """Real roots in ``x`` of ``-x^3 - (lam + y)^2 + beta_u x - alpha - z = 0``, ascending.

    Solved as the depressed cubic ``x^3 + P x + Q = 0`` by discriminant
    case; a discriminant within ``rel_tol`` of zero counts as a repeated root.
    """
    P = -p.beta_u
    Q = (p.lam + y) ** 2 + p.alpha + z
    disc = -(4 * P**3 + 27 * Q**2)
    scale = max(abs(4 * P**3), 27 * Q**2)
    if scale == 0 or abs(disc) <= rel_tol * scale:
        if P == 0 or scale == 0:
            return [CubicRoot(0.0, 3)] if abs(Q) <= rel_tol else [CubicRoot(float(-np.cbrt(Q)), 1)]
        simple, double = 3 * Q / P, -3 * Q / (2 * P)
        out = [CubicRoot(_polish(simple, P, Q, 1), 1), CubicRoot(_polish(double, P, Q, 2), 2)]
    elif disc > 0:
        m = 2 * np.sqrt(-P / 3)
        theta = np.arccos(np.clip(3 * Q / (P * m), -1.0, 1.0)) / 3
        xs = [m * np.cos(theta - 2 * np.pi * k / 3) for k in range(3)]
        out = [CubicRoot(_polish(float(x), P, Q, 1), 1) for x in xs]
    else:
        r = np.sqrt(-disc / 108)
        x = float(np.cbrt(-Q / 2 + r) + np.cbrt(-Q / 2 - r))
        out = [CubicRoot(_polish(x, P, Q, 1), 1)]
    return sorted(out, key=lambda c: c.x)


@dataclass(frozen=True)
class FastEquilibrium:
    x: float
    stable: bool


def fast_equilibria(z: float, p: NormalFormParams) -> list[FastEquilibrium]:
    """Fixed points of the (x, y) subsystem at frozen ``z``, ascending in ``x``.

    They lie on ``y = x``, so ``x`` solves
    ``x^3 + x^2 + (2 lam - beta_u) x + lam^2 + alpha + u + z = 0``.
    """
    coeffs = [1.0, 1.0, 2 * p.lam - p.beta_u, p.lam**2 + p.alpha + p.u + z]
    out = []
    for r in np.roots(coeffs):
        if abs(r.imag) > 1e-9:
            continue
        x = float(r.real)
        a, b = -3 * x**2 + p.beta_u, -2 * (p.lam + x)
        # Jacobian [[a, b], [eps_s, -eps_s]]
        tr, det = a - p.eps_s, -p.eps_s * (a + b)
        out.append(FastEquilibrium(x, bool(tr < 0 and det > 0)))
    return sorted(out, key=lambda e: e.x)


def default_dt_max(p: NormalFormParams) -> float:
    return 0.1 / max(1.0, abs(p.beta_u))


def nf_integrate(
    s0: NfState,
    p: NormalFormParams,
    t_end: float,
    dt_max: float | None = None,
    rtol: float = 1e-7,
    atol: float = 1e-9,
) -> Trace:
    """Adaptive RK integration sampled every ``dt_max``.

    The explicit solver is swapped for LSODA if it reports stiffness
    (step underflow); :class:`StepFailure` is raised if that fails too.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    dt = default_dt_max(p) if dt_max is None else dt_max
    t_eval = np.arange(0.0, t_end + 0.5 * dt, dt)
    t_eval = t_eval[t_eval <= t_end]
    fun = lambda t, s: _f(s, p)  # noqa: E731
    jac = lambda t, s: nf_jacobian(NfState(*s), p)  # noqa: E731
    sol = solve_ivp(fun, (0.0, t_end), s0.as_array(), method="RK45", t_eval=t_eval, max_step=dt, rtol=rtol, atol=atol)
    if sol.status != 0:
        sol = solve_ivp(fun, (0.0, t_end), s0.as_array(), method="LSODA", t_eval=t_eval, max_step=dt, rtol=rtol, atol=atol, jac=jac)
    if sol.status != 0:
        raise StepFailure(sol.message)
    return Trace(sol.t, sol.y.T.copy(), names=("x", "y", "z"), tau_fast=NF_TAU_FAST)


def amplitude_bound(p: NormalFormParams) -> float:
    """Loose a priori bound on ``|x|`` for bounded trajectories."""
    return 10 * (1 + abs(p.beta_u) + abs(p.alpha) + abs(p.lam))


def quasi_steady(tr: Trace, p: NormalFormParams, tol: float = 0.01) -> np.ndarray:
    """Samples where ``(x, y)`` sits on an equilibrium of the fast subsystem."""
    x, y, z = tr.states.T
    dx = -(x**3) - (p.lam + y) ** 2 + p.beta_u * x - (p.alpha + p.u) - z
    return np.maximum(np.abs(x - y), np.abs(dx)) < tol


def relaxes_between_spikes(tr: Trace, p: NormalFormParams, tol: float = 0.01, discard: float = 0.1) -> bool:
    """True if every interspike interval visits a quasi-steady state."""
    from .spikes import trace_spikes

    ts, _, _ = trace_spikes(tr, discard)
    if len(ts) < 2:
        return False
    q = quasi_steady(tr, p, tol)
    idx = np.searchsorted(tr.times, ts)
    return all(q[a:b].any() for a, b in zip(idx[:-1], idx[1:]))


@dataclass(frozen=True)
class ZLoop:
    """Mean ``z`` at burst onsets and burst terminations."""

    z_on: float
    z_off: float
    n_bursts: int


def burst_z_loop(tr: Trace, discard: float = 0.1) -> ZLoop:
    """Ultra-slow values at which bursts start and stop.

    Bursts are delimited by the classifier's ISI split; only bursts with
    both ends inside the retained window are used.
    """
    from .spikes import burst_spans

    spans = burst_spans(tr, discard)
    inner = spans[1:-1]
    if not inner:
        raise ValueError("need at least three bursts")
    z = tr["z"]
    on = [np.interp(a, tr.times, z) for a, _ in inner]
    off = [np.interp(b, tr.times, z) for _, b in inner]
    return ZLoop(float(np.mean(on)), float(np.mean(off)), len(inner))
