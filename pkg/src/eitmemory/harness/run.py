"""Full experimental sequence: write, store, read, homodyne Monte Carlo, statistics."""
from __future__ import annotations

import dataclasses
import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..eit_medium import SpinWave, amplitude_efficiency, propagate_write, read, store
from ..errors import EITMemoryError, UndefinedMetricError
from ..fields import FieldEnvelope, TimeGrid
from ..homodyne import (
    DemodProfile,
    HomodyneConfig,
    ModeNoise,
    beat,
    centered_flat_profile,
    complex_amplitude,
    demodulate_samples,
    demodulate_trace,
    matched_profile,
    subtract_transients,
    synthesize_record,
)
from ..quadstats import QuadratureSamples, QuadratureStats, TVMetrics, ensemble_stats, paired_stats, tv_metrics
from ..signal_synth import _ramp, amplitude_for_power, make_control, make_signal
from ..zeeman import larmor_frequency, tuned, two_photon_detuning
from .config import RunConfig

STREAM_INPUT, STREAM_OUTPUT, STREAM_NO_SIGNAL, STREAM_AUX = range(4)


@contextmanager
def stage_context(name: str):
    """Tag package errors raised inside with the sequence stage ``name``."""
    try:
        yield
    except EITMemoryError as exc:
        if exc.stage is None:
            exc.stage = name
            if exc.args:
                exc.args = (f"[{name}] {exc.args[0]}",) + exc.args[1:]
        raise


def realization_seed(base_seed: int, k: int) -> int:
    return base_seed ^ k


def record_seed(base_seed: int, k: int, stream: int) -> int:
    return 4 * realization_seed(base_seed, k) + stream


@dataclass
class Deterministic:
    """Noise-free fields of one sequence on the acquisition grid (signal-carrier frame)."""

    grid: TimeGrid
    input: FieldEnvelope
    transmitted: FieldEnvelope
    retrieved: FieldEnvelope
    leak: FieldEnvelope
    windows: dict
    delta: float
    field_H: float
    spin: SpinWave | None = None

    def scaled(self, factor: float) -> "Deterministic":
        s = lambda env: env.with_values(env.values * factor)  # noqa: E731
        return dataclasses.replace(self, input=s(self.input), transmitted=s(self.transmitted), retrieved=s(self.retrieved))

    @property
    def output(self) -> FieldEnvelope:
        return self.transmitted.with_values(self.transmitted.values + self.retrieved.values)


def resolve_zeeman(cfg: RunConfig):
    z = cfg.zeeman
    if cfg.tune_field:
        z = tuned(z, cfg.signal.carrier, cfg.larmor_offset)
    return z, two_photon_detuning(z, cfg.signal.carrier)


def simulate_memory(cfg: RunConfig, amplitude: float | None = None) -> Deterministic:
    """Noise-free write/store/read pass for ``cfg`` (signal amplitude overridable)."""
    spec = cfg.signal if amplitude is None else dataclasses.replace(cfg.signal, amplitude=amplitude)
    params = cfg.resolved_ensemble()
    tim, ctl = cfg.timing, cfg.control
    zcfg, delta = resolve_zeeman(cfg)
    fs = cfg.detection.sample_rate
    dt = 1 / fs
    grid = TimeGrid.spanning(0.0, tim.end + ctl.ramp_time / 2 + cfg.tail, dt)
    t = grid.t
    gate_signal = lambda tt: 1 - _ramp(tt, tim.switch_off, ctl.ramp_time)  # noqa: E731

    inp = make_signal(spec, grid)
    inp = inp.with_values(inp.values * gate_signal(t))
    _, leak = make_control(ctl, tim, grid)

    i_write_end = min(grid.n - 1, math.ceil((tim.switch_off + ctl.ramp_time / 2) * fs - 1e-9))
    i_read = max(i_write_end + 1, math.floor((tim.switch_on - ctl.ramp_time / 2) * fs + 1e-9))
    windows = {
        "input": (0.0, grid.t0 + i_write_end * dt),
        "transmitted": (0.0, grid.t0 + i_write_end * dt),
        "retrieved": (grid.t0 + i_read * dt, grid.t_end),
    }
    transmitted = np.zeros(grid.n, complex)
    retrieved = np.zeros(grid.n, complex)
    spin = None

    if cfg.memory_model == "pure-loss":
        # regenerate rather than shift samples so the image sideband keeps its
        # phase relative to the main line
        shift = round(tim.switch_on * fs) / fs
        replay = make_signal(dataclasses.replace(spec, start=spec.start + shift), grid)
        phase = np.exp(-1j * delta * tim.storage)
        retrieved = cfg.pure_loss_efficiency * phase * replay.values * gate_signal(t - shift)
    else:
        bandwidth = 2 * spec.carrier if spec.mode == "single" else spec.offset
        k = cfg.numerics.substeps(dt, params, ctl.rabi, max(abs(delta), bandwidth))
        fine_w = TimeGrid(0.0, dt / k, i_write_end * k + 1)
        sig_f = make_signal(spec, fine_w)
        sig_f = sig_f.with_values(sig_f.values * gate_signal(fine_w.t))
        rabi_w, _ = make_control(ctl, tim, fine_w)
        with stage_context("write"):
            trans_f, spin = propagate_write(sig_f, rabi_w, params, delta, cfg.numerics)
        t_read0 = grid.t0 + i_read * dt
        with stage_context("store"):
            stored = store(spin, t_read0 - spin.created_at, delta, params)
        fine_r = TimeGrid(t_read0, dt / k, (grid.n - 1 - i_read) * k + 1)
        rabi_r, _ = make_control(ctl, tim, fine_r)
        with stage_context("read"):
            ret_f = read(stored, rabi_r, params, cfg.numerics, delta)
        transmitted[: i_write_end + 1] = trans_f.values[::k]
        retrieved[i_read:] = ret_f.values[::k]

    env = lambda v: FieldEnvelope(grid.t0, dt, v, spec.carrier)  # noqa: E731
    return Deterministic(grid, inp, env(transmitted), env(retrieved), leak, windows, delta, zcfg.magnetic_field_H, spin)


def _stage_profile(cfg: RunConfig, mac: Deterministic, stage: str, env: FieldEnvelope, seed: int) -> tuple[DemodProfile, str]:
    det = cfg.detection
    omega = cfg.signal.offset
    lo, hi = mac.windows[stage]
    t = env.t
    inside = (t >= lo) & (t <= hi)
    bt = beat(env)
    if det.profile == "matched":
        hcfg = HomodyneConfig(det.sample_rate, det.adc_bits, 1.2 * float(np.max(np.abs(bt))) + 10.0)
        record = synthesize_record(env, None, 0.0, hcfg, seed)
        try:
            return matched_profile(record, omega, window=(lo, hi + 0.5 / det.sample_rate)), "matched"
        except ValueError:
            pass
    power = np.abs(env.values[inside]) ** 2
    center = float(np.sum(t[inside] * power) / np.sum(power)) if np.sum(power) > 0 else 0.5 * (lo + hi)
    prof = centered_flat_profile(omega, det.sample_rate, det.n_periods, center)
    start = min(max(prof.t_start, lo), hi - prof.duration)
    start = round(start * det.sample_rate) / det.sample_rate
    kind = prof.kind if det.profile == "flat" else f"{prof.kind} (matched fallback)"
    return DemodProfile(prof.weights, start, det.sample_rate, prof.kind), kind


@dataclass
class RunResult:
    """Outputs of :func:`run_sequence`; all fields are plain values."""

    stats: dict
    tv: TVMetrics | None
    efficiency: dict
    phases: dict
    traces: dict
    noise: dict
    metadata: dict
    provenance: dict
    samples: dict = field(default_factory=dict, repr=False)

    def summary(self) -> dict:
        out = {
            "stats": {k: dataclasses.asdict(v) for k, v in self.stats.items()},
            "tv": None if self.tv is None else dataclasses.asdict(self.tv) | {"V_classical": self.tv.V_classical, "V_loss": self.tv.V_loss},
            "efficiency": self.efficiency,
            "phases": self.phases,
            "noise": self.noise,
            "metadata": self.metadata,
            "provenance": self.provenance,
        }
        return out

    def row(self) -> dict:
        tv = self.tv
        return {
            "efficiency": self.efficiency["efficiency"],
            "efficiency_vs_input": self.efficiency["retrieved_vs_input"],
            "efficiency_vs_transmitted": self.efficiency["retrieved_vs_transmitted"],
            "retrieved_phase": self.phases["retrieved_minus_input"],
            "T": None if tv is None else tv.T,
            "V": None if tv is None else tv.V,
            "V_classical": None if tv is None else tv.V_classical,
            "V_loss": None if tv is None else tv.V_loss,
            "region": None if tv is None else tv.region,
            "retrieved_noise_ratio": self.noise.get("retrieved_ratio"),
            "field_H": self.metadata["field_H"],
            "delta": self.metadata["delta"],
        }


def _efficiencies(d: Deterministic, reference: str) -> dict:
    def safe(ref, out):
        return amplitude_efficiency(ref, out) if ref.energy() > 0 else float("nan")

    eff = {
        "retrieved_vs_transmitted": safe(d.transmitted, d.retrieved),
        "retrieved_vs_input": safe(d.input, d.retrieved),
        "transmitted_vs_input": safe(d.input, d.transmitted),
    }
    eff["efficiency"] = eff[f"retrieved_vs_{reference}"]
    eff["reference"] = reference
    return eff


def run_sequence(cfg: RunConfig, keep_samples: bool = False) -> RunResult:
    """Simulate the whole sequence and its homodyne statistics for ``cfg``."""
    det = cfg.detection
    spec = cfg.signal
    omega = spec.offset
    a_mac = amplitude_for_power(det.macroscopic_power, spec.duration)
    mac = simulate_memory(cfg, amplitude=a_mac)
    d = mac.scaled(spec.amplitude / a_mac)
    eps = det.excess_for(cfg.control.power)
    fs = det.sample_rate

    profiles, kinds = {}, {}
    with stage_context("detection"):
        for j, (stage, env) in enumerate((("input", mac.input), ("transmitted", mac.transmitted), ("retrieved", mac.retrieved))):
            seed = record_seed(cfg.base_seed, 2**20 + j, STREAM_AUX)
            profiles[stage], kinds[stage] = _stage_profile(cfg, mac, stage, env, seed)

    def clean(env, stage):
        x, y = demodulate_samples(beat(env), env.t0, fs, omega, profiles[stage])
        return complex(x, y)

    z = {"input": clean(d.input, "input"), "transmitted": clean(d.transmitted, "transmitted"), "retrieved": clean(d.retrieved, "retrieved")}
    gains = {s: (z[s] / z["input"] if abs(z["input"]) > 0 else 0j) for s in ("transmitted", "retrieved")}
    keeps = {s: math.sqrt(max(1 + eps - abs(g) ** 2, 0.0) / (1 + eps)) for s, g in gains.items()}

    eff = _efficiencies(d, det.efficiency_reference)
    amp = {s: complex(complex_amplitude(beat(env), env.t0, fs, omega, profiles[s])) for s, env in (("input", d.input), ("retrieved", d.retrieved))}
    phases = {
        "input": float(np.angle(amp["input"])),
        "retrieved": float(np.angle(amp["retrieved"])),
        "retrieved_minus_input": float(np.angle(amp["retrieved"] * np.conj(amp["input"]))) if abs(amp["input"]) and abs(amp["retrieved"]) else float("nan"),
        "retrieved_minus_set": float(np.angle(amp["retrieved"] * np.exp(-1j * spec.phase))) if abs(amp["retrieved"]) else float("nan"),
    }
    metadata = {
        "delta": d.delta,
        "field_H": d.field_H,
        "larmor_frequency": larmor_frequency(dataclasses.replace(cfg.zeeman, magnetic_field_H=d.field_H)),
        "excess_noise": eps,
        "profiles": kinds,
        "window_placement": "matched profiles over stage windows; flat windows centered on the stage energy centroid",
        "windows": {k: list(v) for k, v in d.windows.items()},
        "profile_windows": {k: [p.t_start, p.t_start + p.duration] for k, p in profiles.items()},
        "clean_quadratures": {k: [v.real, v.imag] for k, v in z.items()},
        "gains": {k: [v.real, v.imag] for k, v in gains.items()},
    }
    provenance = {"config_sha256": cfg.digest(), "base_seed": cfg.base_seed, "code_version": __version__}

    R = cfg.realizations
    if R == 0:
        return RunResult({}, None, eff, phases, {}, {}, metadata, provenance)

    with stage_context("detection"):
        in_rows, out_rows = _acquire(cfg, d, profiles, z, gains, keeps, eps)
    with stage_context("statistics"):
        return _analyze(cfg, d, profiles, in_rows, out_rows, eff, phases, metadata, provenance, keep_samples)


def _acquire(cfg, d, profiles, z, gains, keeps, eps):
    det, fs, omega, R = cfg.detection, cfg.detection.sample_rate, cfg.signal.offset, cfg.realizations
    hcfg = det.homodyne
    n = d.grid.n
    zero = d.input.with_values(np.zeros(n))
    out_env = d.output
    jitter_rng = np.random.default_rng([cfg.base_seed, STREAM_AUX])
    jitters = 1 + cfg.control.leak_jitter * jitter_rng.standard_normal(R)
    in_rows = np.empty((R, n))
    out_rows = np.empty((R, n))
    for k in range(R):
        rec_in = synthesize_record(d.input, None, 0.0, hcfg, record_seed(cfg.base_seed, k, STREAM_INPUT))
        in_rows[k] = rec_in.samples
        xi, yi = demodulate_samples(rec_in.samples, rec_in.t0, fs, omega, profiles["input"])
        n_in = complex(xi, yi) - z["input"]
        modes = [ModeNoise(profiles[s], omega, gains[s] * n_in, keeps[s]) for s in ("transmitted", "retrieved")]
        leak = d.leak.with_values(d.leak.values * jitters[k])
        rec = synthesize_record(out_env, leak, eps, hcfg, record_seed(cfg.base_seed, k, STREAM_OUTPUT), modes)
        if det.subtract:
            ref = synthesize_record(zero, leak, eps, hcfg, record_seed(cfg.base_seed, k, STREAM_NO_SIGNAL))
            rec = subtract_transients(rec, ref)
        out_rows[k] = rec.samples
    return in_rows, out_rows


def _analyze(cfg, d, profiles, in_rows, out_rows, eff, phases, metadata, provenance, keep_samples):
    det, fs, omega, R = cfg.detection, cfg.detection.sample_rate, cfg.signal.offset, cfg.realizations
    ids = np.arange(R)
    qs = {"input": QuadratureSamples(*demodulate_samples(in_rows, 0.0, fs, omega, profiles["input"]), "input", ids)}
    for stage in ("transmitted", "retrieved"):
        qs[stage] = QuadratureSamples(*demodulate_samples(out_rows, 0.0, fs, omega, profiles[stage]), stage, ids)

    stats: dict[str, QuadratureStats] = {"input": ensemble_stats(qs["input"])}
    for stage in ("transmitted", "retrieved"):
        stats[stage] = paired_stats(qs["input"], qs[stage])[1]
    try:
        tv = tv_metrics(stats["input"], stats["retrieved"])
    except UndefinedMetricError:
        tv = None

    centers, tx, ty = demodulate_trace(out_rows, 0.0, fs, omega, det.n_periods)
    _, ix, iy = demodulate_trace(in_rows, 0.0, fs, omega, det.n_periods)
    traces = {
        "time": centers,
        "output_mean_X": tx.mean(0),
        "output_mean_Y": ty.mean(0),
        "output_var_X": tx.var(0, ddof=1),
        "output_var_Y": ty.var(0, ddof=1),
        "input_mean_X": ix.mean(0),
        "input_mean_Y": iy.mean(0),
        "input_var_X": ix.var(0, ddof=1),
        "input_var_Y": iy.var(0, ddof=1),
    }
    noise = _read_noise(traces, d.windows["retrieved"], 2.0 if det.subtract else 1.0, R, cfg)

    samples = {"quadratures": qs, "input_records": in_rows, "output_records": out_rows} if keep_samples else {}
    return RunResult(stats, tv, eff, phases, traces, noise, metadata, provenance, samples)


def _read_noise(traces: dict, window, vacuum: float, R: int, cfg: RunConfig) -> dict:
    """Output variance pooled over sliding windows inside the read stage, in vacuum units."""
    half = cfg.detection.n_periods * math.pi / cfg.signal.offset
    t = traces["time"]
    sel = (t - half >= window[0]) & (t + half <= window[1])
    if not np.any(sel):
        return {}
    v = 0.5 * (traces["output_var_X"][sel] + traces["output_var_Y"][sel]) / vacuum
    independent = max(1, int(np.sum(sel)) // 2)
    return {
        "retrieved_ratio": float(v.mean()),
        "retrieved_ratio_std_err": float(math.sqrt(1.0 / (R - 1) / independent)),
        "windows": int(np.sum(sel)),
    }
