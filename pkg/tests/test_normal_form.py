from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstcircuit.normal_form import (
    PRESETS,
    NfState,
    NormalFormParams,
    amplitude_bound,
    burst_z_loop,
    critical_manifold_roots,
    fast_equilibria,
    nf_integrate,
    nf_jacobian,
    nf_rhs,
    relaxes_between_spikes,
)
from burstcircuit.spikes import classify

finite = st.floats(-2.0, 2.0)


def test_rhs_examples():
    assert nf_rhs(NfState(0, 0, 0), NormalFormParams()) == (0.0, 0.0, 0.0)
    p = NormalFormParams(eps_s=0.1, eps_u=0.01)
    assert nf_rhs(NfState(1, 1, 1), p) == pytest.approx((-3, 0, 0))
    assert nf_rhs(NfState(1, 1, 1), p.with_input(2.0)) == pytest.approx((-5, 0, 0))


def test_timescale_validation():
    with pytest.raises(ValueError):
        NormalFormParams(eps_s=0.05, eps_u=0.01)
    with pytest.raises(ValueError):
        NormalFormParams(eps_s=0.5, eps_u=0.01)


def test_cubic_root_examples():
    r = critical_manifold_roots(0, 0, NormalFormParams())
    assert [(c.x, c.multiplicity) for c in r] == [(0.0, 3)]
    r = critical_manifold_roots(1, 0, NormalFormParams())
    assert len(r) == 1 and r[0].x == pytest.approx(-1.0, abs=1e-12)
    r = critical_manifold_roots(0, 2, NormalFormParams(beta_u=3.0))
    assert [c.multiplicity for c in r] == [1, 2]
    assert r[0].x == pytest.approx(-2.0, abs=1e-12)
    assert r[1].x == pytest.approx(1.0, abs=1e-8)


def test_cubic_three_roots_sorted():
    r = critical_manifold_roots(0, 0, NormalFormParams(beta_u=1.0))
    assert [c.x for c in r] == pytest.approx([-1.0, 0.0, 1.0], abs=1e-12)


@settings(max_examples=200)
@given(finite, finite, finite, finite, finite, finite)
def test_roots_solve_the_cubic(lam, alpha, beta, y, z, u):
    p = NormalFormParams(lam, alpha, beta, u=u)
    roots = critical_manifold_roots(y, z, p)
    assert 1 <= len(roots) <= 3
    assert all(a.x <= b.x for a, b in zip(roots, roots[1:]))
    for r in roots:
        res = -(r.x**3) - (lam + y) ** 2 + beta * r.x - alpha - z
        assert abs(res) <= 1e-10
        if r.multiplicity == 1:
            dx, _, _ = nf_rhs(NfState(r.x, y, z), NormalFormParams(lam, alpha, beta))
            assert abs(dx) <= 1e-10


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(100):
        lam, alpha, beta, u = rng.uniform(-2, 2, 4)
        p = NormalFormParams(lam, alpha, beta, eps_s=rng.uniform(0.01, 0.1), eps_u=rng.uniform(0, 0.001), u=u)
        s = rng.uniform(-2, 2, 3)
        J = nf_jacobian(NfState(*s), p)
        fd = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd[:, k] = (np.array(nf_rhs(NfState(*(s + e)), p)) - np.array(nf_rhs(NfState(*(s - e)), p))) / (2 * h)
        scale = np.maximum(np.abs(J), 1.0)
        assert np.all(np.abs(fd - J) <= 1e-5 * scale)


@settings(max_examples=15, deadline=None)
@given(finite, finite, st.floats(0.0, 2.0))
def test_trajectories_bounded(lam, alpha, beta):
    p = NormalFormParams(lam, alpha, beta)
    tr = nf_integrate(NfState(0.0, 0.0, 0.0), p, 300.0, dt_max=0.2)
    assert np.all(np.abs(tr["x"]) <= amplitude_bound(p))


def test_integrate_rejects_nonpositive_horizon():
    with pytest.raises(ValueError):
        nf_integrate(NfState(0, 0, 0), NormalFormParams(), 0.0)


def test_presets_exist():
    assert set(PRESETS) == {"nf-tonic", "nf-burst"}


def test_fast_equilibria_lie_on_the_critical_manifold():
    p = NormalFormParams(0.25, 0.0, 0.5)
    for z in np.linspace(-1, 1, 21):
        for e in fast_equilibria(z, p):
            assert any(abs(r.x - e.x) < 1e-8 for r in critical_manifold_roots(e.x, z, p))


def test_tonic_preset_relaxes_after_each_spike():
    p = PRESETS["nf-tonic"]
    tr = nf_integrate(NfState(0, 0, 0), p, 3000.0, dt_max=0.5)
    c = classify(tr)
    assert c.mode == "Tonic" and c.isi_cv < 0.2
    assert relaxes_between_spikes(tr, p)


def test_frozen_z_bistability():
    # z inside the window where rest and spiking coexist
    p = replace(PRESETS["nf-burst"], eps_u=0.0)
    z = -0.17
    (rest,) = [e for e in fast_equilibria(z, p) if e.stable]
    swings = []
    for s0 in (NfState(rest.x, rest.x, z), NfState(1.0, 0.0, z)):
        x = nf_integrate(s0, p, 1500.0, dt_max=0.5)["x"][-1500:]
        swings.append(x.max() - x.min())
    assert swings[0] < 1e-6
    assert swings[1] > 1.0


@pytest.mark.slow
def test_burst_preset_classifies_bursting_with_z_loop():
    p = PRESETS["nf-burst"]
    tr = nf_integrate(NfState(0, 0, 0), p, 20000.0, dt_max=0.5)
    c = classify(tr)
    assert c.mode == "Bursting"
    assert c.spikes_per_burst >= 2
    loop = burst_z_loop(tr)
    # bursts start at small z and stop at large z
    assert loop.z_on < loop.z_off
