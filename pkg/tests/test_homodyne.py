import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitmemory.errors import SaturationError
from eitmemory.fields import FieldEnvelope, TimeGrid
from eitmemory.homodyne import (
    DemodProfile,
    HomodyneConfig,
    HomodyneRecord,
    ModeNoise,
    beat,
    centered_flat_profile,
    complex_amplitude,
    demodulate,
    demodulate_samples,
    demodulate_trace,
    flat_profile,
    load_records,
    matched_profile,
    quantize,
    save_records,
    subtract_transients,
    synthesize_record,
    window_profile,
)
from eitmemory.signal_synth import SidebandSpec, make_signal, pulse_shape

FS = 5e7
OMEGA = 2 * math.pi * 1.25e6
CFG = HomodyneConfig()


def vacuum(n, t0=0.0):
    return FieldEnvelope(t0, 1 / FS, np.zeros(n), OMEGA)


def records(env, count, eps=0.0, leak=None, seed0=0, cfg=CFG):
    return np.array([synthesize_record(env, leak, eps, cfg, seed0 + k).samples for k in range(count)])


def profiles(env_weights):
    return {
        "flat2": flat_profile(OMEGA, FS, 2, 1e-6),
        "flat3": flat_profile(OMEGA, FS, 3, 1e-6),
        "flat4": flat_profile(OMEGA, FS, 4, 1e-6),
        "window": window_profile(0.5e-6, 4e-6, FS),
        "matched": DemodProfile.from_weights(env_weights, 0.0, FS, "matched"),
    }


def test_flat_tone_projections():
    n = flat_profile(OMEGA, FS, 2, 0.0)
    t = n.t
    A = 3.0
    N = len(t)
    k = math.sqrt(N / 2)  # sum cos^2 = N/2 over whole periods, unit-normed basis
    x, y = demodulate_samples(A * np.cos(OMEGA * t), 0.0, FS, OMEGA, n)
    assert (x, y) == (pytest.approx(A * k, rel=1e-12), pytest.approx(0.0, abs=1e-12))
    x, y = demodulate_samples(A * np.sin(OMEGA * t), 0.0, FS, OMEGA, n)
    assert (x, y) == (pytest.approx(0.0, abs=1e-12), pytest.approx(A * k, rel=1e-12))


def test_flat_profile_length_is_whole_periods():
    for n in (2, 3, 4):
        assert flat_profile(OMEGA, FS, n, 0.0).duration == pytest.approx(n * 2 * math.pi / OMEGA)


def test_profile_invariants():
    with pytest.raises(ValueError):
        DemodProfile(np.zeros(10), 0.0, FS)
    with pytest.raises(ValueError):
        DemodProfile(np.ones(10), 0.0, FS)
    p = DemodProfile.from_weights(np.arange(1.0, 11.0), 0.0, FS)
    assert np.sum(p.weights**2) == pytest.approx(2.0, abs=1e-12)


def test_window_overflow():
    with pytest.raises(ValueError):
        demodulate_samples(np.zeros(10), 0.0, FS, OMEGA, flat_profile(OMEGA, FS, 2, 0.0))


def test_vacuum_variance_is_one_for_every_profile():
    n = 300
    rows = records(vacuum(n), 10_000, seed0=10)
    se = math.sqrt(2 / 9999)
    w = np.exp(-0.5 * ((np.arange(n) - 150) / 40) ** 2)
    for name, prof in profiles(w).items():
        x, y = demodulate_samples(rows, 0.0, FS, OMEGA, prof)
        for q in (x, y):
            assert abs(q.mean()) < 3 / math.sqrt(10_000), name
            assert abs(q.var(ddof=1) - 1) < 3 * se, name


def test_coherent_sideband_means_and_variance():
    grid = TimeGrid.spanning(0.0, 6e-6, 1 / FS)
    phi, alpha = 0.6, 4.0
    spec = SidebandSpec(amplitude=alpha, phase=phi, suppression_db=math.inf, duration=4e-6, start=1e-6)
    env = make_signal(spec, grid)
    prof = DemodProfile.from_weights(pulse_shape(spec, grid.t), 0.0, FS, "matched")
    rows = records(env, 10_000, seed0=99)
    x, y = demodulate_samples(rows, 0.0, FS, OMEGA, prof)
    x0, y0 = demodulate_samples(beat(env), 0.0, FS, OMEGA, prof)
    # noiseless projection is the oracle for the Monte Carlo mean
    assert abs(x.mean() - x0) < 3 / 100 and abs(y.mean() - y0) < 3 / 100
    assert abs(x.var(ddof=1) - 1) < 3 * math.sqrt(2 / 9999)
    assert abs(y.var(ddof=1) - 1) < 3 * math.sqrt(2 / 9999)
    # and that projection is (alpha cos phi, alpha sin phi) up to edge cross-talk
    assert x0 == pytest.approx(alpha * math.cos(phi), abs=0.03 * alpha)
    assert y0 == pytest.approx(alpha * math.sin(phi), abs=0.03 * alpha)


def test_quantization_noise_is_negligible():
    rng = np.random.default_rng(5)
    x = rng.uniform(-7.9, 7.9, 200_000)
    q, clipped = quantize(x, 14, 8.0)
    assert clipped == 0
    assert np.var(q - x) < (8.0 * 2**-13) ** 2 / 12 * 1.05
    assert np.var(q - x) < 1e-6


def test_quantizer_is_mid_rise():
    q, _ = quantize(np.array([0.0, 1e-9, -1e-9]), 3, 4.0)
    np.testing.assert_allclose(q, [0.5, 0.5, -0.5])


def test_saturation_raises():
    env = FieldEnvelope(0.0, 1 / FS, np.full(1000, 1e6), OMEGA)
    with pytest.raises(SaturationError):
        synthesize_record(env, None, 0.0, CFG, 1)


def test_negative_excess_noise_rejected():
    with pytest.raises(ValueError):
        synthesize_record(vacuum(10), None, -0.1, CFG, 1)


def test_excess_noise_scales_variance():
    rows = records(vacuum(200), 4000, eps=0.5, seed0=3)
    x, _ = demodulate_samples(rows, 0.0, FS, OMEGA, flat_profile(OMEGA, FS, 2, 1e-6))
    assert x.var(ddof=1) == pytest.approx(1.5, abs=3 * 1.5 * math.sqrt(2 / 3999))


def test_records_are_seeded():
    a = synthesize_record(vacuum(50), None, 0.0, CFG, 7).samples
    b = synthesize_record(vacuum(50), None, 0.0, CFG, 7).samples
    c = synthesize_record(vacuum(50), None, 0.0, CFG, 8).samples
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_subtraction_rules():
    a = synthesize_record(vacuum(50), None, 0.0, CFG, 1)
    with pytest.raises(ValueError):
        subtract_transients(a, synthesize_record(vacuum(50), None, 0.0, CFG, 1))
    with pytest.raises(ValueError):
        subtract_transients(a, synthesize_record(vacuum(60), None, 0.0, CFG, 2))
    with pytest.raises(ValueError):
        subtract_transients(a, synthesize_record(vacuum(50), None, 0.0, HomodyneConfig(adc_bits=12), 2))


def test_subtraction_cancels_common_content_and_doubles_noise():
    n = 400
    t = np.arange(n) / FS
    leak = FieldEnvelope(0.0, 1 / FS, math.sqrt(FS) * np.cos(2 * math.pi * 1.2e6 * t) * np.exp(-((t - 4e-6) / 1e-6) ** 2), 0.0)
    prof = flat_profile(OMEGA, FS, 2, 3.5e-6)
    before, after = [], []
    for k in range(10_000):
        a = synthesize_record(vacuum(n), leak, 0.0, CFG, 2 * k)
        b = synthesize_record(vacuum(n), leak, 0.0, CFG, 2 * k + 1)
        before.append(demodulate(a, OMEGA, prof))
        after.append(demodulate(subtract_transients(a, b), OMEGA, prof))
    before, after = np.array(before), np.array(after)
    ratio = after.var(axis=0, ddof=1) / before.var(axis=0, ddof=1)
    assert np.all((ratio > 1.9) & (ratio < 2.1))
    # the leak shifts the raw mean but cancels after subtraction
    assert np.max(np.abs(before.mean(axis=0))) > 10 * math.sqrt(1 / 10_000)
    assert np.all(np.abs(after.mean(axis=0)) < 3 * math.sqrt(2 / 10_000))


def test_subtraction_keeps_signal_exactly():
    grid = TimeGrid.spanning(0.0, 6e-6, 1 / FS)
    env = make_signal(SidebandSpec(amplitude=6.0, duration=4e-6, start=1e-6), grid)
    a = synthesize_record(env, None, 0.0, CFG, 1)
    b = synthesize_record(vacuum(grid.n), None, 0.0, CFG, 2)
    diff = subtract_transients(a, b)
    prof = flat_profile(OMEGA, FS, 2, 2e-6)
    xa, ya = demodulate(a, OMEGA, prof)
    xb, yb = demodulate(b, OMEGA, prof)
    xd, yd = demodulate(diff, OMEGA, prof)
    assert (xd, yd) == (pytest.approx(xa - xb, abs=1e-12), pytest.approx(ya - yb, abs=1e-12))
    assert diff.shot_sigma == pytest.approx(math.sqrt(2))


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    r1, r2 = rng.standard_normal(400), rng.standard_normal(400)
    prof = flat_profile(OMEGA, FS, 3, 1e-6)
    d = lambda s: np.array(demodulate_samples(s, 0.0, FS, OMEGA, prof))  # noqa: E731
    np.testing.assert_allclose(d(a * r1 + b * r2), a * d(r1) + b * d(r2), atol=1e-10)


@given(st.floats(-math.pi, math.pi))
@settings(max_examples=30, deadline=None)
def test_phase_rotation_rotates_amplitude(theta):
    grid = TimeGrid.spanning(0.0, 6e-6, 1 / FS)
    spec = SidebandSpec(amplitude=3.0, phase=0.3, duration=4e-6, start=1e-6)
    prof = DemodProfile.from_weights(pulse_shape(spec, grid.t), 0.0, FS)
    a0 = complex_amplitude(beat(make_signal(spec, grid)), 0.0, FS, OMEGA, prof)
    spec2 = SidebandSpec(amplitude=3.0, phase=0.3 + theta, duration=4e-6, start=1e-6, suppression_db=math.inf)
    spec1 = SidebandSpec(amplitude=3.0, phase=0.3, duration=4e-6, start=1e-6, suppression_db=math.inf)
    a1 = complex_amplitude(beat(make_signal(spec1, grid)), 0.0, FS, OMEGA, prof)
    a2 = complex_amplitude(beat(make_signal(spec2, grid)), 0.0, FS, OMEGA, prof)
    assert a2 == pytest.approx(a1 * np.exp(1j * theta), abs=1e-9)
    assert abs(a0) > 0


def test_normalization_drift_over_a_million_samples():
    prof = window_profile(0.0, 1e6 / FS, FS)
    u, v = prof.basis(OMEGA)
    assert abs(np.sum(u * u) - 1) < 1e-9
    assert abs(np.sum(v * v) - 1) < 1e-9
    assert abs(np.sum(prof.weights**2) - 2) < 1e-9


def _macroscopic(spec, grid, seed=4):
    env = make_signal(spec, grid)
    cfg = HomodyneConfig(full_scale=float(np.max(np.abs(beat(env)))) + 10)
    return synthesize_record(env, None, 0.0, cfg, seed), env


def test_matched_profile_follows_rectangle():
    grid = TimeGrid.spanning(0.0, 15e-6, 1 / FS)
    spec = SidebandSpec(amplitude=4000.0, duration=5e-6, start=5e-6, suppression_db=math.inf)
    rec, _ = _macroscopic(spec, grid)
    prof = matched_profile(rec, OMEGA)
    truth = pulse_shape(spec, prof.t)
    assert np.corrcoef(prof.weights, truth)[0, 1] > 0.99


def test_matched_profile_refuses_noise():
    rec = synthesize_record(vacuum(500), None, 0.0, CFG, 1)
    with pytest.raises(ValueError):
        matched_profile(rec, OMEGA)
    with pytest.raises(ValueError):
        matched_profile(HomodyneRecord(np.zeros(500)), OMEGA)


def snr(prof, env, count=4000, seed0=0):
    rows = records(env, count, seed0=seed0, cfg=HomodyneConfig(full_scale=16))
    x, y = demodulate_samples(rows, 0.0, FS, OMEGA, prof)
    return 4 * (x.mean() ** 2 + y.mean() ** 2) / (0.5 * (x.var(ddof=1) + y.var(ddof=1)))


def test_matched_profile_beats_flat_windows():
    grid = TimeGrid.spanning(0.0, 15e-6, 1 / FS)
    spec = SidebandSpec(amplitude=4000.0, duration=5e-6, start=5e-6, suppression_db=math.inf)
    rec, _ = _macroscopic(spec, grid)
    weak = make_signal(SidebandSpec(amplitude=3.0, duration=5e-6, start=5e-6, suppression_db=math.inf), grid)
    m = matched_profile(rec, OMEGA)
    candidates = {f"flat{n}": centered_flat_profile(OMEGA, FS, n, 7.5e-6) for n in (2, 3, 4)}
    scores = {k: snr(p, weak) for k, p in candidates.items()}
    assert snr(m, weak) > max(scores.values())


def test_mode_noise_imprint_is_exact():
    n = 600
    prof = flat_profile(OMEGA, FS, 3, 2e-6)
    c = 0.3 - 0.7j
    rec0 = synthesize_record(vacuum(n), None, 0.0, CFG, 11)
    rec1 = synthesize_record(vacuum(n), None, 0.0, CFG, 11, [ModeNoise(prof, OMEGA, c, 0.5)])
    x0, y0 = demodulate(rec0, OMEGA, prof)
    x1, y1 = demodulate(rec1, OMEGA, prof)
    # quantization adds < 1e-3 of error
    assert x1 == pytest.approx(0.5 * x0 + c.real, abs=2e-3)
    assert y1 == pytest.approx(0.5 * y0 + c.imag, abs=2e-3)


def test_trace_matches_direct_windows():
    rng = np.random.default_rng(1)
    s = rng.standard_normal(1000)
    centers, xs, ys = demodulate_trace(s, 0.0, FS, OMEGA, 2)
    length = len(flat_profile(OMEGA, FS, 2, 0.0).weights)
    for j in (0, 5, len(centers) - 1):
        start = (centers[j] - (length - 1) / 2 / FS)
        x, y = demodulate_samples(s, 0.0, FS, OMEGA, flat_profile(OMEGA, FS, 2, start))
        assert (xs[j], ys[j]) == (pytest.approx(x, abs=1e-9), pytest.approx(y, abs=1e-9))


def test_record_file_round_trip(tmp_path):
    recs = [synthesize_record(vacuum(64, 1e-6), None, 0.0, CFG, s) for s in (3, 4, 5)]
    path = tmp_path / "r.ehr"
    save_records(path, recs)
    back = load_records(path)
    assert [r.seed for r in back] == [3, 4, 5]
    for a, b in zip(recs, back):
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.header() == b.header()


def test_record_file_errors(tmp_path):
    bad = tmp_path / "bad.ehr"
    bad.write_bytes(b"NOTMAGIC")
    with pytest.raises(ValueError):
        load_records(bad)
    good = tmp_path / "g.ehr"
    save_records(good, [synthesize_record(vacuum(64), None, 0.0, CFG, 1)])
    good.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_records(good)
    with pytest.raises(ValueError):
        save_records(tmp_path / "x", [])
