from dataclasses import replace

import numpy as np
import pytest

from burstcircuit.circuit import TimescaleError, reference_config
from burstcircuit.engine import (
    CircuitState,
    CircuitSystem,
    NoTransition,
    NotAtRest,
    attractor_census,
    circuit_integrate,
    circuit_rhs,
    equilibria,
    excitability_experiment,
    holding_current,
    z_transition_hysteresis,
)
from burstcircuit.spikes import classify

BURST = reference_config()
TONIC = reference_config(r_i2=34.5e3)


def test_timescale_ordering():
    for c in (BURST, TONIC):
        c.check_timescales()
        assert c.tau_fast == pytest.approx(0.82e-6)
        assert c.tau_ultra == pytest.approx(4.7e-6 * 2350)
    with pytest.raises(TimescaleError):
        replace(BURST, c_fast=1e-6).check_timescales()


def test_equilibrium_residual():
    c = replace(BURST, i_app=replace(BURST.i_app, baseline=2 * holding_current(BURST)))
    eqs = equilibria(CircuitSystem(c), c.i_app(0.0))
    assert eqs
    for e in eqs:
        d = circuit_rhs(CircuitState(*e.state), c)
        assert max(abs(x) for x in d) <= 1e-8


def test_frozen_vz_attractors():
    # above the window every start reaches the cycle, below it the node
    assert attractor_census(BURST, 4.7) == {"cycle": 9, "node": 0}
    assert attractor_census(BURST, 3.4) == {"cycle": 0, "node": 9}


def test_grid_missing_window_raises():
    with pytest.raises(NoTransition):
        z_transition_hysteresis(BURST, np.arange(4.5, 5.0, 0.01))
    with pytest.raises(NoTransition):
        z_transition_hysteresis(BURST, [4.0])


def test_runs_are_deterministic_and_bounded():
    a = circuit_integrate(None, BURST, 5e-3)
    b = circuit_integrate(None, BURST, 5e-3)
    assert a.events == b.events
    assert np.array_equal(a.states, b.states)
    assert np.all(np.diff(a.times) > 0)
    assert a.states.min() >= -0.1 and a.states.max() <= BURST.v_cc + 0.1


def test_unrested_baseline_rejected():
    with pytest.raises(NotAtRest):
        excitability_experiment(BURST, "bursting", [-20e-6], 2e-3, baseline=0.0)


def test_zero_step_gives_no_spikes():
    (r,) = excitability_experiment(BURST, "bursting", [0.0], 2e-3, t_post=10e-3)
    assert (r.n_spikes, r.response_duration) == (0, 0.0)


@pytest.mark.slow
def test_long_run_stays_in_rails():
    tr = circuit_integrate(None, BURST, 100e-3)
    assert tr.states.min() >= -0.1 and tr.states.max() <= BURST.v_cc + 0.1


@pytest.mark.slow
def test_ultra_slow_capacitor_scales_interburst_interval():
    base = classify(circuit_integrate(None, BURST, 40e-3))
    slow = replace(BURST, c_o=10 * BURST.c_o)
    scaled = classify(circuit_integrate(None, slow, 400e-3, dt_max=1e-6))
    assert base.mode == scaled.mode == "Bursting"
    assert scaled.interburst_interval / base.interburst_interval == pytest.approx(10, rel=0.3)
    assert scaled.interspike_interval == pytest.approx(base.interspike_interval, rel=0.1)
