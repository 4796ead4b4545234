"""Spike detection and firing-pattern classification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Mode = Literal["Quiescent", "Tonic", "Bursting", "Irregular"]


class TooShort(ValueError):
    """Trace holds too few spikes to classify."""


@dataclass(frozen=True)
class Classification:
    mode: Mode
    spikes_per_burst: float = 0.0
    interspike_interval: float = 0.0
    interburst_interval: float = 0.0
    duty_cycle: float = 0.0
    n_spikes: int = 0
    isi_cv: float = float("nan")

    def __str__(self) -> str:
        if self.mode == "Bursting":
            return (
                f"Bursting: {self.spikes_per_burst:.1f} spikes/burst, ISI {self.interspike_interval:.4g} s, "
                f"IBI {self.interburst_interval:.4g} s, duty {self.duty_cycle:.2f}"
            )
        if self.mode in ("Tonic", "Irregular"):
            return f"{self.mode}: {self.n_spikes} spikes, ISI {self.interspike_interval:.4g} s, CV {self.isi_cv:.3f}"
        return "Quiescent"


def detect_spikes(
    t: np.ndarray,
    v: np.ndarray,
    refractory: float,
    hysteresis: float = 0.1,
    min_swing: float = 0.0,
) -> np.ndarray:
    """Upward threshold crossings of ``v``.

    The threshold sits midway between the signal's extremes; a new spike
    needs the signal to have dropped below ``threshold - band/2`` and to
    rise above ``threshold + band/2``, with ``band`` a fraction
    ``hysteresis`` of the span. Signals spanning less than ``min_swing``
    hold no spikes. Crossings closer than
    ``refractory`` to the previous spike are ignored.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if len(v) < 2:
        return np.empty(0)
    v_lo, v_hi = float(v.min()), float(v.max())
    span = v_hi - v_lo
    if span <= min_swing:
        return np.empty(0)
    th = 0.5 * (v_lo + v_hi)
    hi = th + 0.5 * hysteresis * span
    lo = th - 0.5 * hysteresis * span
    # Band entries only: +1 entering above, -1 entering below.
    state = np.where(v > hi, 1, np.where(v < lo, -1, 0))
    nz = np.flatnonzero(state)
    out: list[float] = []
    armed = False
    last = -np.inf
    prev = 0
    for i in nz:
        st = state[i]
        if st == prev:
            continue
        prev = st
        if st < 0:
            armed = True
        elif armed and i > 0:
            a, b = v[i - 1], v[i]
            tc = t[i - 1] + (hi - a) / (b - a) * (t[i] - t[i - 1])
            armed = False
            if tc - last >= refractory:
                out.append(tc)
                last = tc
    return np.array(out)


def _bursts(isi: np.ndarray, split: float) -> list[int]:
    """Spike counts of the bursts delimited by ISIs longer than ``split``."""
    counts, n = [], 1
    for d in isi:
        if d > split:
            counts.append(n)
            n = 1
        else:
            n += 1
    counts.append(n)
    return counts


def _censored_edges(ts: np.ndarray, isi: np.ndarray, t_start: float | None, t_end: float | None) -> list[float]:
    edges = []
    if t_start is not None and ts[0] - t_start > isi.max():
        edges.append(ts[0] - t_start)
    if t_end is not None and t_end - ts[-1] > isi.max():
        edges.append(t_end - ts[-1])
    return edges


def burst_split(isi: np.ndarray, edges=(), ratio: float = 5.0) -> float | None:
    """Gap length separating intra-burst ISIs from inter-burst silences.

    The split sits in the widest jump (at least a factor 2) of the sorted
    log gaps; ``None`` when the gaps are not bimodal.
    """
    gaps = np.concatenate([isi, list(edges)])
    if gaps.max() / isi.min() <= ratio:
        return None
    logs = np.sort(np.log(gaps))
    steps = np.diff(logs)
    k = int(np.argmax(steps))
    if steps[k] <= np.log(2.0):
        return None
    return float(np.exp(0.5 * (logs[k] + logs[k + 1])))


def classify_spike_times(
    ts: np.ndarray,
    t_start: float | None = None,
    t_end: float | None = None,
    ratio: float = 5.0,
    cv_tonic: float = 0.2,
) -> Classification:
    """Classify spike times observed over ``[t_start, t_end]``.

    The silences before the first and after the last spike are censored
    intervals (lower bounds on a true interval); they count as burst
    boundaries when longer than every observed ISI.
    """
    ts = np.asarray(ts, dtype=float)
    n = len(ts)
    if n == 0:
        return Classification("Quiescent")
    if n < 4:
        raise TooShort(f"only {n} spikes")
    isi = np.diff(ts)
    cv = float(isi.std() / isi.mean())
    edges = _censored_edges(ts, isi, t_start, t_end)
    split = burst_split(isi, edges, ratio)
    if split is not None:
        gaps_all = np.concatenate([isi, edges])
        short = isi[isi <= split]
        long_ = gaps_all[gaps_all > split]
        counts = _bursts(isi, split)
        inner = counts[1:-1] if len(counts) >= 4 else counts
        spb = float(np.mean(inner))
        isi_s = float(short.mean()) if len(short) else float(isi.min())
        ibi = float(long_.mean())
        if spb >= 2 and ibi >= ratio * isi_s:
            active = (spb - 1) * isi_s
            return Classification(
                "Bursting",
                spikes_per_burst=spb,
                interspike_interval=isi_s,
                interburst_interval=ibi,
                duty_cycle=active / (active + ibi),
                n_spikes=n,
                isi_cv=cv,
            )
    mode: Mode = "Tonic" if cv < cv_tonic else "Irregular"
    return Classification(mode, spikes_per_burst=1.0, interspike_interval=float(isi.mean()), n_spikes=n, isi_cv=cv)


def spike_signal(tr) -> np.ndarray:
    """Signal whose upward excursions are spikes (v_x dips in the circuit, x rises in the normal form)."""
    if "x" in tr.names:
        return tr["x"]
    return -tr["vx"]


def trace_spikes(tr, discard: float = 0.1, refractory: float | None = None) -> tuple[np.ndarray, float, float]:
    """Spike times of a trace after dropping the first ``discard`` fraction.

    Returns ``(spike_times, t_start, t_end)`` of the retained window. The
    refractory window defaults to 20 fast time constants.
    """
    if len(tr.times) < 10:
        raise TooShort("fewer than 10 samples")
    t0 = tr.times[0] + discard * (tr.times[-1] - tr.times[0])
    sel = tr.times >= t0
    tau = tr.tau_fast if tr.tau_fast is not None else 0.0
    ref = 20 * tau if refractory is None else refractory
    sig = spike_signal(tr)[sel]
    swing = 0.2 if "vx" in tr.names else 0.05
    ts = detect_spikes(tr.times[sel], sig, ref, min_swing=swing)
    return ts, float(t0), float(tr.times[-1])


def classify(tr, discard: float = 0.1, refractory: float | None = None) -> Classification:
    """Classify the firing pattern of a trace, treating its start as settling."""
    ts, t0, t1 = trace_spikes(tr, discard, refractory)
    return classify_spike_times(ts, t0, t1)


def burst_spans(tr, discard: float = 0.1, refractory: float | None = None) -> list[tuple[float, float]]:
    """``(first spike, last spike)`` of every burst in the retained window."""
    ts, t0, t1 = trace_spikes(tr, discard, refractory)
    if len(ts) < 4:
        return []
    isi = np.diff(ts)
    split = burst_split(isi, _censored_edges(ts, isi, t0, t1))
    if split is None:
        return []
    cuts = np.flatnonzero(isi > split)
    starts = np.concatenate([[0], cuts + 1])
    stops = np.concatenate([cuts, [len(ts) - 1]])
    return [(float(ts[a]), float(ts[b])) for a, b in zip(starts, stops)]
