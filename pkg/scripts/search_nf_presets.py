"""Grid search for tonic and bursting parameter sets of the normal form.

All points of a (lam, alpha, beta_u) grid over [-2, 2]^3 are integrated
together with fixed-step RK4 and classified. A tonic point must return to
a quasi-steady state on the right branch (y > -lam) between spikes; a
bursting point needs at least three spikes per burst. The most interior
point of each class (largest cube of same-class neighbours) is re-checked
with the adaptive integrator.

With eps_s = 0.05 and eps_u = 0.005 the grid holds such tonic points, but
every bursting label there is a transient or a doublet whose gaps differ by
less than 5x. The bursting stage therefore uses eps_u = 0.001, which
separates the burst and quiescent phases far enough.

    python scripts/search_nf_presets.py [--step 0.25]

Takes about 15 minutes on one core.
"""

from __future__ import annotations

import argparse
import itertools
import time

import numpy as np

from burstcircuit.engine import Trace
from burstcircuit.normal_form import (
    NF_TAU_FAST,
    NfState,
    NormalFormParams,
    burst_z_loop,
    nf_integrate,
    quasi_steady,
    relaxes_between_spikes,
)
from burstcircuit.spikes import TooShort, burst_spans, classify, trace_spikes

EPS_S = 0.05


def batch_rk4(lam, alpha, beta, t_end, eps_s, eps_u, dt=0.1, every=10, keep_from=0.0, full_state=False):
    """Fixed-step RK4 over all grid points at once; returns sample times and states."""
    n = lam.size
    s = np.zeros((3, n))

    def f(s):
        x, y, z = s
        return np.stack([-(x**3) - (lam + y) ** 2 + beta * x - alpha - z, eps_s * (x - y), eps_u * (x - z)])

    n_steps = int(round(t_end / dt))
    k0 = int(round(keep_from / dt))
    kept = list(range(k0 - k0 % every, n_steps + 1, every))
    xs = np.empty((len(kept), 3 if full_state else 1, n), dtype=np.float32)
    j = 0
    for k in range(n_steps + 1):
        if k > 0:
            k1 = f(s)
            k2 = f(s + 0.5 * dt * k1)
            k3 = f(s + 0.5 * dt * k2)
            k4 = f(s + dt * k3)
            s = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if j < len(kept) and k == kept[j]:
            xs[j] = s if full_state else s[:1]
            j += 1
    return np.array(kept) * dt, xs


def as_trace(t, states):
    st = states.astype(float)
    if st.shape[1] == 1:
        st = np.column_stack([st[:, 0], np.zeros_like(t), np.zeros_like(t)])
    return Trace(t, st, names=("x", "y", "z"), tau_fast=NF_TAU_FAST)


def label(tr):
    x = tr["x"]
    if not np.all(np.isfinite(x)) or np.abs(x).max() > 50:
        return "Diverged", None
    try:
        c = classify(tr)
    except TooShort:
        return "TooShort", None
    return c.mode, c


def interior_score(labels, idx, mode):
    """Half-width of the largest cube of identical labels centred on ``idx``."""
    shape = labels.shape
    r = 0
    while True:
        r1 = r + 1
        lo = [i - r1 for i in idx]
        hi = [i + r1 + 1 for i in idx]
        if min(lo) < 0 or any(h > s for h, s in zip(hi, shape)):
            return r
        block = labels[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]]
        if not np.all(block == mode):
            return r
        r = r1


def right_branch_rest(tr, p):
    q = quasi_steady(tr, p)
    return bool(q.any() and tr["y"][q].mean() > -p.lam)


def pick(grid, shape, labels, wanted, tie_break):
    """Most interior point of class ``wanted``; ties go to the largest ``tie_break(j)``."""
    lab = np.array(labels, dtype=object).reshape(shape)
    best = None
    for j, m in enumerate(labels):
        if m != wanted:
            continue
        key = (interior_score(lab, np.unravel_index(j, shape), wanted), tie_break(j))
        if best is None or key > best[0]:
            best = (key, j)
    return None if best is None else (best[0][0], best[1])


def tonic_stage(grid, shape, eps_u, t_end):
    t0 = time.time()
    t, st = batch_rk4(*grid.T, t_end, EPS_S, eps_u, keep_from=t_end / 3, full_state=True)
    print(f"tonic stage: integrated {len(grid)} points in {time.time() - t0:.1f} s")
    labels, isi = [], {}
    for j, (lam, alpha, beta) in enumerate(grid):
        tr = as_trace(t, st[:, :, j])
        m, c = label(tr)
        if m == "Tonic" and c.isi_cv < 0.05 and beta > 0:
            p = NormalFormParams(lam, alpha, beta, EPS_S, eps_u)
            if relaxes_between_spikes(tr, p, discard=0.0) and right_branch_rest(tr, p):
                print(f"  hit lam={lam:g} alpha={alpha:g} beta_u={beta:g}: {c}")
                m = "TonicRelaxation"
                isi[j] = c.interspike_interval
        labels.append(m)
    modes, counts = np.unique(labels, return_counts=True)
    print(dict(zip(modes, counts.tolist())))
    # ties go to the fastest rhythm
    return pick(grid, shape, labels, "TonicRelaxation", lambda j: -isi[j])


def burst_stage(grid, shape, eps_u, t_end):
    t0 = time.time()
    t, xs = batch_rk4(*grid.T, t_end, EPS_S, eps_u)
    print(f"burst stage: integrated {len(grid)} points in {time.time() - t0:.1f} s")
    labels, spb = [], {}
    for j in range(len(grid)):
        tr = as_trace(t, xs[:, :, j])
        m, c = label(tr)
        # spikes on the slow timescale, several per burst, and a settled
        # rhythm rather than a start-up transient
        if (
            m == "Bursting"
            and c.spikes_per_burst >= 3
            and c.interspike_interval <= 5 / EPS_S
            and grid[j, 2] > 0
            and len(burst_spans(tr)) >= 5
        ):
            print(f"  hit lam={grid[j, 0]:g} alpha={grid[j, 1]:g} beta_u={grid[j, 2]:g}: {c}")
            m = "BurstingMany"
            spb[j] = c.spikes_per_burst
        labels.append(m)
    modes, counts = np.unique(labels, return_counts=True)
    print(dict(zip(modes, counts.tolist())))
    # ties go to the most spikes per burst
    return pick(grid, shape, labels, "BurstingMany", lambda j: spb[j])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--step", type=float, default=0.25)
    ap.add_argument("--eps-u-tonic", type=float, default=0.005)
    ap.add_argument("--eps-u-burst", type=float, default=0.001)
    ap.add_argument("--t-end-tonic", type=float, default=6000.0)
    ap.add_argument("--t-end-burst", type=float, default=20000.0)
    ap.add_argument("--stage", choices=("both", "tonic", "burst"), default="both")
    args = ap.parse_args()
    axis = np.round(np.arange(-2, 2 + 1e-9, args.step), 6)
    grid = np.array(list(itertools.product(axis, axis, axis)))
    shape = (len(axis),) * 3

    for name, stage, eps_u, t_end in (
        ("nf-tonic", tonic_stage, args.eps_u_tonic, args.t_end_tonic),
        ("nf-burst", burst_stage, args.eps_u_burst, args.t_end_burst),
    ):
        if args.stage not in ("both", name.removeprefix("nf-")):
            continue
        best = stage(grid, shape, eps_u, t_end)
        if best is None:
            print(f"{name}: no point found")
            continue
        score, j = best
        lam, alpha, beta = (float(v) for v in grid[j])
        p = NormalFormParams(lam, alpha, beta, EPS_S, eps_u)
        tr = nf_integrate(NfState(0.0, 0.0, 0.0), p, t_end)
        print(f"{name}: lam={lam:g} alpha={alpha:g} beta_u={beta:g} eps_u={eps_u:g} interior radius {score}")
        print(f"  adaptive: {classify(tr)}")
        if name == "nf-tonic":
            print(f"  relaxes between spikes: {relaxes_between_spikes(tr, p)}")
        else:
            print(f"  {burst_z_loop(tr)}")
        print(f"  spikes in trace: {len(trace_spikes(tr)[0])}")


if __name__ == "__main__":
    main()
