"""Neuron model tests against independent scalar reference implementations.

The reference steppers below are written directly from the documented
integration scheme (two half-steps for the quadratic membrane, entry
cut-off check; one full step and post-check for the adaptive LIF) without
importing the package's internals, and the package must match them
bit-for-bit.
"""

import numpy as np
import pytest

from spikebench import (
    AdaptiveLifParams,
    ConfigError,
    IzhikevichParams,
    NeuronState,
    NumericalDivergenceError,
    izhikevich_preset,
    step_adaptive_lif,
    step_izhikevich,
)
from spikebench.neurons import step_adaptive_lif_batch, step_izhikevich_batch


# ---------------------------------------------------------------- oracles

def oracle_izh(v, u, a, b, c, d, v_peak, i, dt):
    if v >= v_peak:
        return c, u + d, True
    half = 0.5 * dt
    v1 = v + half * (0.04 * v * v + 5.0 * v + 140.0 - u + i)
    v2 = v1 + half * (0.04 * v1 * v1 + 5.0 * v1 + 140.0 - u + i)
    u2 = u + dt * (a * (b * v2 - u))
    return v2, u2, False


def oracle_lif(v, c, refr, p, i, dt):
    c2 = c - dt * (c / p.tau_c)
    if refr > 0.0:
        return p.v_reset, c2, max(refr - dt, 0.0), False
    v2 = v + dt * ((p.v_rest - v) / p.tau_m - p.g_c * c * (v - p.e_k) + i)
    if v2 >= p.v_thresh:
        return p.v_reset, c2 + p.delta_c, p.t_refr, True
    return v2, c2, 0.0, False


def run_oracle_izh(params, v, u, drive, n_steps, dt=1.0):
    spikes = []
    for t in range(n_steps):
        v, u, s = oracle_izh(v, u, params.a, params.b, params.c, params.d,
                             params.v_peak, drive, dt)
        if s:
            spikes.append(t)
    return spikes, v, u


# ---------------------------------------------------------------- presets

def test_presets_match_canonical_coefficients():
    rs = izhikevich_preset("RS")
    fs = izhikevich_preset("fs")
    assert (rs.a, rs.b, rs.c, rs.d, rs.v_peak) == (0.02, 0.2, -65.0, 8.0, 30.0)
    assert (fs.a, fs.b, fs.c, fs.d, fs.v_peak) == (0.1, 0.2, -65.0, 2.0, 30.0)


def test_presets_differ_only_in_a_and_d():
    rs, fs = izhikevich_preset("rs"), izhikevich_preset("fs")
    assert rs.b == fs.b and rs.c == fs.c and rs.v_peak == fs.v_peak
    assert rs.a != fs.a and rs.d != fs.d


def test_preset_unknown_kind():
    with pytest.raises(ConfigError):
        izhikevich_preset("bursting")


def test_param_invariants():
    with pytest.raises(ConfigError):
        IzhikevichParams(a=0.0, b=0.2, c=-65.0, d=8.0)
    with pytest.raises(ConfigError):
        IzhikevichParams(a=0.02, b=0.2, c=40.0, d=8.0, v_peak=30.0)
    with pytest.raises(ConfigError):
        AdaptiveLifParams(tau_m=-1.0)
    with pytest.raises(ConfigError):
        AdaptiveLifParams(v_thresh=-60.0, v_reset=-50.0)
    with pytest.raises(ConfigError):
        NeuronState(v=float("nan"), w=0.0)


# ------------------------------------------------- quadratic-model physics

def test_rs_true_fixed_point_is_stationary():
    # (v, u) = (-70, -14) solves both nullclines exactly for RS
    rs = izhikevich_preset("rs")
    state = NeuronState(v=-70.0, w=-14.0)
    for _ in range(50):
        state, spiked = step_izhikevich(state, rs, 0.0, 1.0)
        assert not spiked
    assert state.v == -70.0 and state.w == -14.0


def test_rs_zero_input_never_spikes_from_standard_init():
    rs = izhikevich_preset("rs")
    state = NeuronState(v=-65.0, w=0.2 * -65.0)
    for _ in range(5000):
        state, spiked = step_izhikevich(state, rs, 0.0, 1.0)
        assert not spiked
    # trajectory settles at the true fixed point
    assert abs(state.v + 70.0) < 1e-6


def test_rs_tonic_spike_count_matches_oracle_exactly():
    rs = izhikevich_preset("rs")
    expected_spikes, _, _ = run_oracle_izh(rs, -70.0, -14.0, drive=10.0, n_steps=1000)
    state = NeuronState(v=-70.0, w=-14.0)
    got = []
    for t in range(1000):
        state, spiked = step_izhikevich(state, rs, 10.0, 1.0, step=t)
        if spiked:
            got.append(t)
    assert got == expected_spikes
    assert len(got) == 19  # frozen from the oracle at dt=1


def test_entry_cutoff_reset_rule():
    rs = izhikevich_preset("rs")
    state = NeuronState(v=31.0, w=5.0)
    new, spiked = step_izhikevich(state, rs, 0.0, 1.0, step=77)
    assert spiked
    assert new.v == rs.c
    assert new.w == 5.0 + rs.d
    assert new.last_spike_step == 77


def test_izhikevich_divergence_raises():
    rs = izhikevich_preset("rs")
    with pytest.raises(NumericalDivergenceError):
        step_izhikevich(NeuronState(v=-65.0, w=-13.0), rs, 1e300, 1.0)


def test_izhikevich_rejects_bad_dt():
    rs = izhikevich_preset("rs")
    with pytest.raises(ConfigError):
        step_izhikevich(NeuronState(v=-65.0, w=-13.0), rs, 0.0, 0.0)


# --------------------------------------------------- adaptive LIF physics

def test_lif_rest_is_fixed_point():
    p = AdaptiveLifParams()
    state = NeuronState(v=p.v_rest, w=0.0)
    for _ in range(1000):
        state, spiked = step_adaptive_lif(state, p, 0.0, 1.0)
        assert not spiked
    assert state.v == p.v_rest and state.w == 0.0


def test_lif_reset_contract_and_refractory():
    p = AdaptiveLifParams(t_refr=2.0)
    state = NeuronState(v=p.v_thresh - 0.1, w=0.0)
    state, spiked = step_adaptive_lif(state, p, 50.0, 1.0, step=3)
    assert spiked
    assert state.v == p.v_reset
    assert state.w == pytest.approx(p.delta_c, abs=1e-12)
    assert state.refr_remaining == p.t_refr
    assert state.last_spike_step == 3
    # held for two steps, then integrating again
    state, spiked = step_adaptive_lif(state, p, 50.0, 1.0)
    assert not spiked and state.v == p.v_reset and state.refr_remaining == 1.0
    state, spiked = step_adaptive_lif(state, p, 50.0, 1.0)
    assert not spiked and state.v == p.v_reset and state.refr_remaining == 0.0
    state, spiked = step_adaptive_lif(state, p, 50.0, 1.0)
    assert spiked  # strong drive crosses threshold in one step


def test_lif_adaptation_lengthens_isis():
    # constant suprathreshold drive: ISIs never shrink by more than the
    # 1-step discretization jitter, and early ISIs grow strictly
    p = AdaptiveLifParams()
    for drive in (1.5, 2.0, 3.0):
        state = NeuronState(v=p.v_rest, w=0.0)
        spikes = []
        for t in range(2000):
            state, s = step_adaptive_lif(state, p, drive, 1.0, step=t)
            if s:
                spikes.append(t)
        isis = np.diff(spikes)
        assert len(isis) >= 3
        assert (isis[1:] >= isis[:-1] - 1).all()
        assert isis[-1] > isis[0]


def test_lif_calcium_suppresses_firing():
    p = AdaptiveLifParams()
    def count(c0):
        state = NeuronState(v=p.v_rest, w=c0)
        n = 0
        for _ in range(1000):
            state, s = step_adaptive_lif(state, p, 1.5, 1.0)
            n += s
        return n
    assert count(2.0) < count(0.0)


def test_lif_calcium_stays_non_negative():
    p = AdaptiveLifParams()
    state = NeuronState(v=p.v_rest, w=0.0)
    for _ in range(3000):
        state, _ = step_adaptive_lif(state, p, 2.0, 1.0)
        assert state.w >= 0.0


# ----------------------------------------------- bitwise oracle agreement

def test_izhikevich_matches_oracle_on_random_cases():
    rs = izhikevich_preset("rs")
    fs = izhikevich_preset("fs")
    gen = np.random.default_rng(2024)
    for _ in range(10000):
        params = rs if gen.random() < 0.5 else fs
        v = float(gen.uniform(-90.0, 35.0))
        u = float(gen.uniform(-20.0, 10.0))
        i = float(gen.uniform(-20.0, 20.0))
        ev, eu, es = oracle_izh(v, u, params.a, params.b, params.c, params.d,
                                params.v_peak, i, 1.0)
        state, spiked = step_izhikevich(NeuronState(v=v, w=u), params, i, 1.0)
        assert (state.v, state.w, spiked) == (ev, eu, es)


def test_adaptive_lif_matches_oracle_on_random_cases():
    p = AdaptiveLifParams()
    gen = np.random.default_rng(2025)
    for _ in range(10000):
        v = float(gen.uniform(-90.0, -45.0))
        c = float(gen.uniform(0.0, 5.0))
        refr = float(gen.choice([0.0, 1.0, 2.0]))
        i = float(gen.uniform(-5.0, 10.0))
        ev, ec, erefr, es = oracle_lif(v, c, refr, p, i, 1.0)
        state, spiked = step_adaptive_lif(NeuronState(v=v, w=c, refr_remaining=refr), p, i, 1.0)
        assert (state.v, state.w, state.refr_remaining, spiked) == (ev, ec, erefr, es)


def test_batch_kernels_match_scalar_bitwise():
    rs, fs = izhikevich_preset("rs"), izhikevich_preset("fs")
    gen = np.random.default_rng(7)
    n = 4096
    v = gen.uniform(-90.0, 35.0, n)
    u = gen.uniform(-20.0, 10.0, n)
    i = gen.uniform(-20.0, 20.0, n)
    kind_fs = gen.random(n) < 0.2
    a = np.where(kind_fs, fs.a, rs.a)
    b = np.where(kind_fs, fs.b, rs.b)
    c = np.where(kind_fs, fs.c, rs.c)
    d = np.where(kind_fs, fs.d, rs.d)
    vp = np.full(n, 30.0)
    v2, u2, sp, bad = step_izhikevich_batch(v, u, a, b, c, d, vp, i, 1.0)
    assert not bad.any()
    for j in range(0, n, 37):
        params = fs if kind_fs[j] else rs
        state, spiked = step_izhikevich(
            NeuronState(v=float(v[j]), w=float(u[j])), params, float(i[j]), 1.0
        )
        assert (v2[j], u2[j], sp[j]) == (state.v, state.w, spiked)

    p = AdaptiveLifParams()
    vl = gen.uniform(-90.0, -45.0, n)
    cl = gen.uniform(0.0, 5.0, n)
    rl = gen.choice([0.0, 1.0, 2.0], n)
    il = gen.uniform(-5.0, 10.0, n)
    v2, c2, r2, sp, bad = step_adaptive_lif_batch(vl, cl, rl, p, il, 1.0)
    assert not bad.any()
    for j in range(0, n, 37):
        state, spiked = step_adaptive_lif(
            NeuronState(v=float(vl[j]), w=float(cl[j]), refr_remaining=float(rl[j])),
            p, float(il[j]), 1.0,
        )
        assert (v2[j], c2[j], r2[j], sp[j]) == (state.v, state.w, state.refr_remaining, spiked)


def test_determinism_repeated_calls():
    rs = izhikevich_preset("rs")
    s0 = NeuronState(v=-60.0, w=-12.0)
    out1 = step_izhikevich(s0, rs, 4.0, 1.0)
    out2 = step_izhikevich(s0, rs, 4.0, 1.0)
    assert out1 == out2
