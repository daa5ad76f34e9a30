from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg, signal

from towermon.core import ChannelMeta
from towermon.dsp import psd_welch
from towermon.errors import ParameterError
from towermon.modal import EnvSeries
from towermon.scenarios import build
from towermon.sim import (TOWER_DAMPING, TOWER_FREQUENCIES, DriftSpec, ExcitationSpec, Mode,
                          ModalModel, apply_drift, build_model, default_tower, gate_mode, mode_block,
                          rng, shapes_at, simulate, tilt_record, write_truth)

T0 = datetime(2017, 11, 20, tzinfo=timezone.utc)


def one_mode(f=1.0, xi=0.01, rate=20.0, output="velocity"):
    ch = (ChannelMeta("S945", "x", 42.0, "velocity", 1.0, rate),)
    return ModalModel((Mode(f, xi, [1.0]),), 1.0 / rate, ch, output=output)


def free_response(model, seconds):
    # a one-sample pulse of unit impulse, then free vibration
    exc = ExcitationSpec.pulse(0.0, model.dt, 1.0 / model.dt)
    return simulate(model, exc, seconds).segments(model.channels[0].key)[0].samples


# -- discretization --------------------------------------------------------

@given(st.floats(0.05, 9.0), st.floats(0.0, 0.3), st.sampled_from([0.01, 0.05]))
def test_mode_block_matches_zoh_exponential(f, xi, dt):
    w = 2 * np.pi * f
    Ac = np.array([[0.0, 1.0], [-w * w, -2 * xi * w]])
    M = np.zeros((3, 3))
    M[:2, :2], M[1, 2] = Ac, 1.0
    E = linalg.expm(M * dt)
    Ad, Bd, _, _ = mode_block(f, xi, dt)
    np.testing.assert_allclose(Ad, E[:2, :2], rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(Bd, E[:2, 2], rtol=1e-9, atol=1e-14 * dt)


@given(st.floats(0.05, 9.0), st.floats(0.0, 0.3))
def test_pole_modulus(f, xi):
    dt = 0.05
    mu = np.linalg.eigvals(mode_block(f, xi, dt)[0])
    np.testing.assert_allclose(np.abs(mu), np.exp(-xi * 2 * np.pi * f * dt), rtol=1e-12)


def test_output_rows():
    f, xi, dt = 1.3, 0.02, 0.01
    w = 2 * np.pi * f
    for out, c, d in (("displacement", [1, 0], 0.0), ("velocity", [0, 1], 0.0),
                      ("acceleration", [-w * w, -2 * xi * w], 1.0)):
        _, _, cc, dd = mode_block(f, xi, dt, out)
        np.testing.assert_allclose(cc, c)
        assert dd == d
    with pytest.raises(ParameterError):
        mode_block(f, xi, dt, "jerk")


def test_build_model_is_block_diagonal():
    modes = [Mode(1.0, 0.01, [1.0, 2.0]), Mode(3.0, 0.02, [0.5, -1.0])]
    dm = build_model(modes, 0.01)
    np.testing.assert_array_equal(dm.A[:2, 2:], 0.0)
    np.testing.assert_allclose(dm.A[2:, 2:], mode_block(3.0, 0.02, 0.01)[0])
    np.testing.assert_allclose(dm.C[:, 1], [1.0, 2.0])
    with pytest.raises(ParameterError):
        build_model([Mode(60.0, 0.01, [1.0])], 0.01)


# -- free response ---------------------------------------------------------

def test_undamped_mode_keeps_its_amplitude():
    rate, f = 20.0, 1.0
    y = free_response(one_mode(f, 0.0, rate), 600)
    per = int(rate / f)
    peaks = np.abs(y[per:]).reshape(-1, per).max(axis=1)
    np.testing.assert_allclose(peaks, peaks[0], rtol=1e-3)
    assert abs(peaks[-1] / peaks[0] - 1) < 1e-3


@pytest.mark.parametrize("xi", [0.005, 0.02])
def test_decay_rate(xi):
    rate, f = 100.0, 1.5
    y = free_response(one_mode(f, xi, rate), 120)
    # free vibration decays as exp(-xi w t)
    t = np.arange(y.size) / rate
    per = int(round(rate / f))
    m = y.size // per
    env = np.abs(y[:m * per]).reshape(m, per).max(axis=1)
    tc = t[:m * per].reshape(m, per).mean(axis=1)
    slope = np.polyfit(tc[1:], np.log(env[1:]), 1)[0]
    assert slope == pytest.approx(-xi * 2 * np.pi * f, rel=0.02)


def test_impulse_response_matches_lsim():
    rate, f, xi = 50.0, 2.0, 0.03
    y = free_response(one_mode(f, xi, rate), 10)
    w = 2 * np.pi * f
    t = np.arange(y.size) / rate
    sys = signal.StateSpace([[0, 1], [-w * w, -2 * xi * w]], [[0], [1]], [[0, 1]], [[0]])
    u = np.zeros(y.size)
    u[0] = rate
    _, ref, _ = signal.lsim(sys, u, t, interp=False)
    np.testing.assert_allclose(y, ref, atol=1e-9 * np.abs(ref).max())


# -- stochastic response ---------------------------------------------------

def test_psd_peaks_at_tower_frequencies():
    rec = build("default", hours=4, rate=20.0).record
    sp = [psd_welch(s, nfft=4096) for key in ("S945.x", "S945.y") for s in rec.segments(key)]
    freqs = sp[0].freqs
    power = sum(p.power for p in sp)
    for f, xi in zip(TOWER_FREQUENCIES, TOWER_DAMPING):
        band = np.abs(freqs - f) < 0.1
        k = np.flatnonzero(band)[np.argmax(power[band])]
        # within the half-power half-width of the resonance
        assert abs(freqs[k] - f) <= max(xi * f, sp[0].resolution)


def test_same_seed_same_record():
    a = build("default", hours=1, rate=20.0, seed=5).record
    b = build("default", hours=1, rate=20.0, seed=5).record
    c = build("default", hours=1, rate=20.0, seed=6).record
    for m in a.metas:
        np.testing.assert_array_equal(a.segments(m.key)[0].samples, b.segments(m.key)[0].samples)
    assert not np.array_equal(a.segments("S945.x")[0].samples, c.segments("S945.x")[0].samples)


def test_rng_streams_are_independent():
    assert rng(1, 2).standard_normal() != rng(1, 3).standard_normal()
    assert rng(1, 2).standard_normal() == rng(1, 2).standard_normal()


def test_superposition():
    model = default_tower(20.0)
    e1 = ExcitationSpec.harmonic(1.1, 2.0)
    e2 = ExcitationSpec.pulse(10.0, 0.5, 3.0)
    key = "S945.y"
    y = lambda exc: simulate(model, exc, 120.0).segments(key)[0].samples
    both, a, b = y([e1, e2]), y(e1), y(e2)
    np.testing.assert_allclose(both, a + b, atol=1e-9 * np.abs(both).max())


def test_snr_is_amplitude_ratio():
    model = default_tower(20.0)
    exc = ExcitationSpec.white_noise()
    clean = simulate(model, exc, 3600.0, seed=3).segments("S943.x")[0].samples
    noisy = simulate(model, exc, 3600.0, seed=3, snr=10.0).segments("S943.x")[0].samples
    assert np.std(noisy - clean) / np.sqrt(np.mean(clean ** 2)) == pytest.approx(0.1, rel=0.02)


def test_mode_above_nyquist_is_rejected():
    with pytest.raises(ParameterError):
        one_mode(f=12.0, rate=20.0)
    with pytest.raises(ParameterError):
        Mode(1.0, 1.0, [1.0])


# -- drift and gating ------------------------------------------------------

def step_temperature(hours=48, step_at=24, low=5.0, high=15.0):
    times = [T0 + timedelta(hours=k) for k in range(hours)]
    vals = np.where(np.arange(hours) < step_at, low, high)
    return EnvSeries("temperature", times, vals)


def test_zero_sensitivity_keeps_frequencies():
    model = default_tower(20.0)
    drift = DriftSpec(step_temperature(), 0.0, 0.0, 0.0, 10.0)
    for _, m in apply_drift(model, drift, start=T0, count=48):
        np.testing.assert_array_equal(m.frequencies, model.frequencies)


def test_drift_formula_and_lag():
    model = default_tower(20.0)
    s, lag = 0.002, 3.0
    drift = DriftSpec(step_temperature(), s, s, lag, 10.0)
    out = apply_drift(model, drift, start=T0, count=48)
    scale = np.array([m.frequencies[0] / model.frequencies[0] for _, m in out])
    expected = np.where(np.arange(48) < 24 + lag, 1 + s * (5.0 - 10.0), 1 + s * (15.0 - 10.0))
    np.testing.assert_allclose(scale, expected, rtol=1e-12)
    assert out[0][0] == T0 and out[1][0] == T0 + timedelta(hours=1)


def test_regime_sensitivity_switches_at_zero():
    times = [T0 + timedelta(hours=k) for k in range(4)]
    env = EnvSeries("temperature", times, [-4.0, -4.0, 4.0, 4.0])
    out = apply_drift(default_tower(20.0), DriftSpec(env, 0.01, -0.01, 0.0, 0.0), start=T0, count=4)
    scale = [m.frequencies[1] / TOWER_FREQUENCIES[1] for _, m in out]
    np.testing.assert_allclose(scale, [1.04, 1.04, 1.04, 1.04], rtol=1e-12)


def test_drift_to_nyquist_is_rejected():
    drift = DriftSpec(step_temperature(), 0.5, 0.5, 0.0, 0.0)
    with pytest.raises(ParameterError):
        apply_drift(default_tower(10.0), drift, start=T0, count=48)


@given(st.integers(1, 200), st.floats(0, 1), st.integers(0, 1000))
def test_gate_keeps_exact_count(n, fraction, seed):
    models = [(T0 + timedelta(hours=k), default_tower(20.0)) for k in range(n)]
    gated, active = gate_mode(models, 3, fraction, seed)
    assert active.sum() == round(fraction * n)
    for (_, m), on in zip(gated, active):
        assert (m.modes[3].gain == 1.0) == bool(on)
        assert all(md.gain == 1.0 for md in m.modes[:3])


# -- geometry and sidecars -------------------------------------------------

def test_shapes_at_interpolates_along_height():
    model = default_tower(20.0)
    sh = shapes_at(model, 24.0)
    np.testing.assert_allclose(sh, [[m.shape[0], m.shape[1]] for m in model.modes])
    np.testing.assert_allclose(shapes_at(model, 0.0), 0.0)
    at37 = np.array(shapes_at(model, 37.0))
    lo, hi = np.array(shapes_at(model, 24.0)), np.array(shapes_at(model, 42.0))
    np.testing.assert_allclose(at37, lo + (hi - lo) * 13.0 / 18.0, rtol=1e-12)


def test_tilt_record_amplitude_and_lag():
    rec = tilt_record(days=1.0, rate=1.0, offset_h=5.0)
    x = rec.segments("S2.x")[0].samples
    y = rec.segments("S2.y")[0].samples
    assert np.max(np.abs(x)) == pytest.approx(9.80665e-4, rel=1e-6)
    np.testing.assert_allclose(y[5 * 3600:], x[:-5 * 3600], atol=1e-15)


def test_write_truth(tmp_path):
    models = [(T0, default_tower(20.0))]
    write_truth(models, tmp_path / "truth.csv", comment="config_digest=x")
    lines = (tmp_path / "truth.csv").read_text().splitlines()
    assert lines[0] == "# config_digest=x"
    assert lines[1] == "window_start,mode_index,f_hz,xi,gain"
    assert len(lines) == 6 and lines[2].split(",")[2] == repr(TOWER_FREQUENCIES[0])
