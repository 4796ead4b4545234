import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstcircuit.engine import Trace
from burstcircuit.spikes import (
    TooShort,
    burst_spans,
    burst_split,
    classify,
    classify_spike_times,
    detect_spikes,
)


def _pulse_trace(spike_times, t_end, dt=1e-5, width=5e-5, tau=1e-6):
    t = np.arange(0.0, t_end, dt)
    v = np.full_like(t, 5.0)
    for s in spike_times:
        v[(t >= s) & (t < s + width)] = 1.0  # v_x dips during a spike
    return Trace(t, np.column_stack([v, np.zeros_like(t), np.zeros_like(t)]), tau_fast=tau)


def test_detect_spikes_counts_and_refractory():
    t = np.linspace(0, 1, 10001)
    v = -np.cos(2 * np.pi * 10 * t)
    ts = detect_spikes(t, v, refractory=0.01)
    assert len(ts) == 10
    assert np.allclose(np.diff(ts), 0.1, atol=1e-4)
    assert len(detect_spikes(t, v, refractory=0.15)) == 5
    # a rising start is not a spike until the signal has been low
    assert len(detect_spikes(t, np.sin(2 * np.pi * 10 * t), refractory=0.01)) == 9


def test_detect_spikes_flat_signal():
    t = np.linspace(0, 1, 100)
    assert len(detect_spikes(t, np.ones_like(t), 0.0)) == 0
    assert len(detect_spikes(t, 1e-3 * np.sin(40 * t), 0.0, min_swing=0.1)) == 0


@settings(max_examples=40)
@given(st.integers(2, 30), st.floats(0.0, 1.0))
def test_detect_spikes_finds_every_pulse(n, phase):
    period = 1.0 / n
    times = (np.arange(n) + 0.25 + 0.5 * phase) * period
    t = np.linspace(0, 1, 20001)
    v = np.zeros_like(t)
    for s in times:
        v[(t >= s) & (t < s + 0.1 * period)] = 1.0
    ts = detect_spikes(t, v, refractory=0.2 * period)
    assert len(ts) == n
    assert np.allclose(ts, times, atol=2e-4)


def test_classify_tonic_train():
    tr = _pulse_trace(np.arange(0.5e-3, 40e-3, 1e-3), 40e-3)
    c = classify(tr)
    assert c.mode == "Tonic"
    assert c.interspike_interval == pytest.approx(1e-3, rel=1e-3)
    assert c.isi_cv < 0.01


def test_classify_bursting_train():
    starts = np.arange(2e-3, 100e-3, 20e-3)
    times = np.concatenate([s + 0.5e-3 * np.arange(4) for s in starts])
    c = classify(_pulse_trace(times, 100e-3))
    assert c.mode == "Bursting"
    assert c.spikes_per_burst == pytest.approx(4.0)
    assert c.interburst_interval >= 5 * c.interspike_interval
    assert 0 < c.duty_cycle < 1


def test_single_burst_with_long_silences_is_bursting():
    times = 5e-3 + 0.2e-3 * np.arange(10)
    c = classify_spike_times(times, 0.0, 20e-3)
    assert c.mode == "Bursting"


def test_quiescent_and_too_short():
    assert classify_spike_times([]).mode == "Quiescent"
    with pytest.raises(TooShort):
        classify_spike_times([1.0, 2.0, 3.0])
    assert classify(_pulse_trace([], 10e-3)).mode == "Quiescent"


def test_irregular_train():
    rng = np.random.default_rng(3)
    isi = rng.uniform(1.0, 3.0, 60)
    c = classify_spike_times(np.cumsum(isi))
    assert c.mode == "Irregular"


def test_burst_split_absent_for_unimodal_gaps():
    assert burst_split(np.array([1.0, 1.1, 0.9, 1.05])) is None
    assert burst_split(np.array([1.0, 1.0, 20.0, 1.0])) == pytest.approx(np.sqrt(20.0))


def test_burst_spans_of_regular_bursts():
    starts = np.arange(2e-3, 100e-3, 20e-3)
    times = np.concatenate([s + 0.5e-3 * np.arange(4) for s in starts])
    spans = burst_spans(_pulse_trace(times, 100e-3))
    assert len(spans) >= 4
    for a, b in spans:
        assert b - a == pytest.approx(1.5e-3, abs=2e-5)


@settings(max_examples=30)
@given(st.floats(0.1, 10.0))
def test_classification_is_time_scale_invariant(scale):
    starts = np.arange(2.0, 100.0, 20.0)
    times = np.concatenate([s + 0.5 * np.arange(4) for s in starts])
    a = classify_spike_times(times, 0.0, 100.0)
    b = classify_spike_times(times * scale, 0.0, 100.0 * scale)
    assert a.mode == b.mode
    assert a.spikes_per_burst == b.spikes_per_burst
