"""Homodyne photocurrent synthesis, transient subtraction and quadrature demodulation.

Record samples are in shot-noise units: a vacuum input gives independent
unit-variance samples.  A field bin of duration ``dt`` with local-oscillator-frame
amplitude E contributes ``2 * Re(E) * sqrt(dt)`` to its sample.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import ConfigError, SaturationError
from .fields import FieldEnvelope

MAX_CLIPPED_FRACTION = 1e-3
PROFILE_NORM = 2.0
RECORD_MAGIC = b"EITHREC1"


@dataclass(frozen=True)
class HomodyneConfig:
    """Acquisition settings; ``full_scale`` is in units of the per-sample shot-noise sigma."""

    sample_rate: float = 5e7
    adc_bits: int = 14
    full_scale: float = 8.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ConfigError("must be positive", "detection.sample_rate")
        if not 2 <= self.adc_bits <= 32:
            raise ConfigError("must lie in [2, 32]", "detection.adc_bits")
        if not self.full_scale > 0:
            raise ConfigError("must be positive", "detection.full_scale")

    @property
    def dt(self) -> float:
        return 1 / self.sample_rate

    @property
    def lsb(self) -> float:
        return 2 * self.full_scale / 2**self.adc_bits


@dataclass
class HomodyneRecord:
    """One sampled photocurrent realization."""

    samples: np.ndarray
    sample_rate: float = 5e7
    adc_bits: int = 14
    full_scale: float = 8.0
    seed: int = 0
    shot_sigma: float = 1.0
    t0: float = 0.0

    @property
    def dt(self) -> float:
        return 1 / self.sample_rate

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.sample_rate

    def header(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "adc_bits": self.adc_bits,
            "full_scale": self.full_scale,
            "shot_sigma": self.shot_sigma,
            "t0": self.t0,
        }


@dataclass(frozen=True)
class DemodProfile:
    """Real demodulation weights starting at absolute time ``t_start``.

    Weights are stored with ``sum(w**2) == 2``; demodulation rescales the cosine
    and sine projections separately so a shot-noise-only record gives unit
    variance in each quadrature.
    """

    weights: np.ndarray
    t_start: float
    sample_rate: float
    kind: str = "custom"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if not np.any(w):
            raise ValueError("demodulation weights are identically zero")
        if abs(np.sum(w**2) - PROFILE_NORM) > 1e-6:
            raise ValueError("demodulation profile is not normalized (sum of squared weights must be 2)")

    @classmethod
    def from_weights(cls, weights, t_start: float, sample_rate: float, kind: str = "custom") -> "DemodProfile":
        w = np.asarray(weights, dtype=float)
        return cls(w * math.sqrt(PROFILE_NORM / np.sum(w**2)), t_start, sample_rate, kind)

    @property
    def duration(self) -> float:
        return len(self.weights) / self.sample_rate

    @property
    def t(self) -> np.ndarray:
        return self.t_start + np.arange(len(self.weights)) / self.sample_rate

    def centroid(self) -> float:
        return float(np.sum(self.t * self.weights**2) / np.sum(self.weights**2))

    def basis(self, omega: float) -> tuple[np.ndarray, np.ndarray]:
        """Unit-norm cosine and sine projection vectors over the window."""
        t = self.t
        u = self.weights * np.cos(omega * t)
        v = self.weights * np.sin(omega * t)
        return u / math.sqrt(np.sum(u**2)), v / math.sqrt(np.sum(v**2))


def flat_profile(omega: float, sample_rate: float, n_periods: int, t_start: float) -> DemodProfile:
    """Constant weights over t_m = n * 2 pi / omega."""
    if n_periods < 1:
        raise ValueError("n_periods must be at least 1")
    n = int(round(n_periods * 2 * math.pi / omega * sample_rate))
    return DemodProfile.from_weights(np.ones(n), t_start, sample_rate, f"flat{n_periods}")


def window_profile(t_start: float, duration: float, sample_rate: float) -> DemodProfile:
    """Constant weights over an arbitrary window."""
    n = int(round(duration * sample_rate))
    return DemodProfile.from_weights(np.ones(n), t_start, sample_rate, "flat-window")


def centered_flat_profile(omega: float, sample_rate: float, n_periods: int, center: float) -> DemodProfile:
    prof = flat_profile(omega, sample_rate, n_periods, 0.0)
    start = round((center - prof.duration / 2) * sample_rate) / sample_rate
    return DemodProfile(prof.weights, start, sample_rate, prof.kind)


def _window(profile: DemodProfile, t0: float, sample_rate: float, n_samples: int) -> slice:
    if not math.isclose(profile.sample_rate, sample_rate, rel_tol=1e-12):
        raise ValueError("profile and record sample rates differ")
    start = int(round((profile.t_start - t0) * sample_rate))
    stop = start + len(profile.weights)
    if start < 0 or stop > n_samples:
        raise ValueError(f"demodulation window [{start}, {stop}) overflows record of {n_samples} samples")
    return slice(start, stop)


def demodulate_samples(samples: np.ndarray, t0: float, sample_rate: float, omega: float, profile: DemodProfile):
    """Vectorized demodulation over the last axis; returns (X, Y) arrays."""
    samples = np.asarray(samples, dtype=float)
    win = _window(profile, t0, sample_rate, samples.shape[-1])
    u, v = profile.basis(omega)
    seg = samples[..., win]
    return np.sum(seg * u, axis=-1), np.sum(seg * v, axis=-1)


def complex_amplitude(samples: np.ndarray, t0: float, sample_rate: float, omega: float, profile: DemodProfile) -> np.ndarray:
    """Least-squares complex amplitude a + ib of ``w(t) (a cos + b sin)`` in the window.

    Unlike (X, Y) this stays unbiased when the weights span less than a carrier
    period and the two bases stop being orthogonal.  Its argument is the
    envelope phase.
    """
    samples = np.asarray(samples, dtype=float)
    win = _window(profile, t0, sample_rate, samples.shape[-1])
    t = profile.t_start + np.arange(len(profile.weights)) / sample_rate
    wc, ws = profile.weights * np.cos(omega * t), profile.weights * np.sin(omega * t)
    gram = np.array([[wc @ wc, wc @ ws], [wc @ ws, ws @ ws]])
    seg = samples[..., win]
    rhs = np.stack([seg @ wc, seg @ ws], axis=-1)
    ab = np.linalg.solve(gram, rhs[..., None])[..., 0] if rhs.ndim > 1 else np.linalg.solve(gram, rhs)
    return ab[..., 0] + 1j * ab[..., 1]


def demodulate(record: HomodyneRecord, omega: float, profile: DemodProfile) -> tuple[float, float]:
    """Quadratures (X, Y) of ``record`` at angular frequency ``omega``."""
    x, y = demodulate_samples(record.samples, record.t0, record.sample_rate, omega, profile)
    return float(x), float(y)


def demodulate_trace(samples: np.ndarray, t0: float, sample_rate: float, omega: float, n_periods: int = 2, hop: int | None = None):
    """Time-resolved quadratures from sliding flat windows of ``n_periods`` periods.

    Returns (window centers, X, Y) with X, Y shaped ``samples.shape[:-1] + (n_windows,)``.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[-1]
    length = int(round(n_periods * 2 * math.pi / omega * sample_rate))
    hop = hop or max(1, length // 2)
    t = t0 + np.arange(n) / sample_rate
    c, s = np.cos(omega * t), np.sin(omega * t)
    starts = np.arange(0, n - length + 1, hop)
    if len(starts) == 0:
        raise ValueError("record shorter than one demodulation window")

    def window_sums(a):
        cum = np.concatenate([np.zeros(a.shape[:-1] + (1,)), np.cumsum(a, axis=-1)], axis=-1)
        return cum[..., starts + length] - cum[..., starts]

    xs = window_sums(samples * c) / np.sqrt(window_sums(c**2))
    ys = window_sums(samples * s) / np.sqrt(window_sums(s**2))
    centers = t0 + (starts + (length - 1) / 2) / sample_rate
    return centers, xs, ys


@dataclass
class ModeNoise:
    """Prescribed vacuum noise in one demodulation mode of a record.

    After synthesis the record's noise demodulated with ``profile`` equals
    ``keep * original + coefficient`` (complex X + iY).  This carries input-mode
    fluctuations through a linear memory while the remaining modes stay
    independent.
    """

    profile: DemodProfile
    omega: float
    coefficient: complex = 0j
    keep: float = 1.0


def _imprint(noise: np.ndarray, t0: float, sample_rate: float, mode: ModeNoise) -> None:
    win = _window(mode.profile, t0, sample_rate, len(noise))
    u, v = mode.profile.basis(mode.omega)
    seg = noise[win]
    a = np.array([seg @ u, seg @ v])
    target = mode.keep * a + np.array([mode.coefficient.real, mode.coefficient.imag])
    gram = np.array([[1.0, u @ v], [u @ v, 1.0]])
    c = np.linalg.solve(gram, target - a)
    noise[win] += c[0] * u + c[1] * v


def quantize(x: np.ndarray, adc_bits: int, full_scale: float) -> tuple[np.ndarray, int]:
    """Mid-rise uniform quantizer; returns codes mapped back to sample units and the clip count."""
    q = 2 * full_scale / 2**adc_bits
    clipped = int(np.count_nonzero(np.abs(x) > full_scale))
    y = q * (np.floor(x / q) + 0.5)
    return np.clip(y, -full_scale + q / 2, full_scale - q / 2), clipped


def beat(envelope: FieldEnvelope) -> np.ndarray:
    """Deterministic photocurrent of an envelope beating with the local oscillator."""
    return 2 * np.real(envelope.lo_frame()) * math.sqrt(envelope.dt)


def synthesize_record(
    signal_out: FieldEnvelope,
    leak_trace: FieldEnvelope | None,
    excess_noise: float,
    cfg: HomodyneConfig,
    seed: int,
    mode_noise: tuple[ModeNoise, ...] | list[ModeNoise] = (),
) -> HomodyneRecord:
    """Sampled, quantized photocurrent for one realization.

    White Gaussian noise of variance ``1 + excess_noise`` stands for the vacuum
    in both sidebands plus any excess noise.
    """
    if excess_noise < 0:
        raise ValueError("excess noise must be non-negative")
    if not math.isclose(signal_out.dt, cfg.dt, rel_tol=1e-9):
        raise ValueError("signal envelope is not sampled at the acquisition rate")
    det = beat(signal_out)
    if leak_trace is not None:
        if len(leak_trace.values) != len(det):
            raise ValueError("leak trace and signal differ in length")
        det = det + beat(leak_trace)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(det)) * math.sqrt(1 + excess_noise)
    for mode in mode_noise:
        _imprint(noise, signal_out.t0, cfg.sample_rate, mode)
    samples, clipped = quantize(det + noise, cfg.adc_bits, cfg.full_scale)
    if clipped > MAX_CLIPPED_FRACTION * len(samples):
        raise SaturationError(f"{clipped} of {len(samples)} samples exceed full scale {cfg.full_scale}")
    return HomodyneRecord(samples, cfg.sample_rate, cfg.adc_bits, cfg.full_scale, seed, 1.0, signal_out.t0)


def subtract_transients(with_signal: HomodyneRecord, no_signal: HomodyneRecord) -> HomodyneRecord:
    """Point-to-point difference of a signal record and a signal-free record."""
    a, b = with_signal, no_signal
    if len(a.samples) != len(b.samples):
        raise ValueError("records differ in length")
    if (a.sample_rate, a.adc_bits, a.full_scale, a.t0) != (b.sample_rate, b.adc_bits, b.full_scale, b.t0):
        raise ValueError("records were acquired with different settings")
    if a.seed == b.seed:
        raise ValueError("records share a seed; subtraction would cancel the noise")
    return HomodyneRecord(
        a.samples - b.samples,
        a.sample_rate,
        a.adc_bits,
        2 * a.full_scale,
        a.seed,
        math.hypot(a.shot_sigma, b.shot_sigma),
        a.t0,
    )


def baseband(samples: np.ndarray, t0: float, sample_rate: float, omega: float, smoothing: float = 0.2):
    """Low-passed complex amplitude 2 * <i(t) exp(i omega t)>.

    ``smoothing`` is the Gaussian kernel width in carrier periods.  Returns the
    baseband and the variance its noise would have for unit white noise.
    """
    t = t0 + np.arange(len(samples)) / sample_rate
    sigma = smoothing * 2 * math.pi / omega * sample_rate
    mixed = samples * np.exp(1j * omega * t)
    b = 2 * (gaussian_filter1d(mixed.real, sigma, mode="constant") + 1j * gaussian_filter1d(mixed.imag, sigma, mode="constant"))
    impulse = np.zeros(int(8 * sigma) * 2 + 1)
    impulse[len(impulse) // 2] = 1.0
    kernel = gaussian_filter1d(impulse, sigma, mode="constant")
    return b, 4 * float(np.sum(kernel**2))


def matched_profile(
    macroscopic_record: HomodyneRecord,
    omega: float,
    window: tuple[float, float] | None = None,
    min_snr: float = 10.0,
    smoothing: float = 0.2,
) -> DemodProfile:
    """Demodulation weights following the envelope of a high-power record.

    The weights are the smoothed baseband magnitude with its noise bias removed,
    over ``window`` (absolute start, stop) or the whole record.
    """
    rec = macroscopic_record
    b, noise_var = baseband(rec.samples, rec.t0, rec.sample_rate, omega, smoothing)
    t = rec.t
    if window is not None:
        sel = (t >= window[0] - 0.5 / rec.sample_rate) & (t < window[1] - 0.5 / rec.sample_rate)
        b, t = b[sel], t[sel]
    if len(b) == 0:
        raise ValueError("empty profile window")
    peak = float(np.max(np.abs(b)))
    if peak < min_snr * rec.shot_sigma:
        raise ValueError(f"record SNR per sample {peak / rec.shot_sigma:.3g} is below {min_snr}")
    power = np.abs(b) ** 2 - noise_var * rec.shot_sigma**2
    w = np.sqrt(np.clip(power, 0.0, None))
    return DemodProfile.from_weights(w, float(t[0]), rec.sample_rate, "matched")


def save_records(path, records: list[HomodyneRecord]) -> None:
    """Write records sharing one acquisition setting to a single binary file.

    Layout: 8-byte magic ``EITHREC1``, little-endian uint32 header length, UTF-8
    JSON header, then float64 little-endian samples, record-major.
    """
    if not records:
        raise ValueError("no records to save")
    first = records[0]
    n = len(first.samples)
    for r in records:
        if len(r.samples) != n or r.header() != first.header():
            raise ValueError("records must share length and acquisition settings")
    header = first.header() | {"n_records": len(records), "n_samples": n, "dtype": "<f8", "seeds": [int(r.seed) for r in records]}
    blob = json.dumps(header).encode()
    data = np.stack([np.asarray(r.samples, dtype="<f8") for r in records])
    with open(Path(path), "wb") as fh:
        fh.write(RECORD_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(data.tobytes())


def load_records(path) -> list[HomodyneRecord]:
    """Inverse of :func:`save_records`."""
    with open(Path(path), "rb") as fh:
        if fh.read(8) != RECORD_MAGIC:
            raise ValueError(f"{path}: not a homodyne record file")
        (size,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(size).decode())
        data = np.frombuffer(fh.read(), dtype=header.get("dtype", "<f8"))
    shape = (header["n_records"], header["n_samples"])
    if data.size != shape[0] * shape[1]:
        raise ValueError(f"{path}: truncated sample block")
    data = data.reshape(shape).astype(float)
    seeds = header.get("seeds", list(range(shape[0])))
    return [
        HomodyneRecord(row.copy(), header["sample_rate"], header["adc_bits"], header["full_scale"], seed, header.get("shot_sigma", 1.0), header.get("t0", 0.0))
        for row, seed in zip(data, seeds)
    ]
