"""Input fields: sideband signals, the gated control and its leak transient."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT, h as PLANCK

from .errors import ConfigError
from .fields import FieldEnvelope, TimeGrid, Trace

CS_D2_WAVELENGTH = 852.347e-9
# control coupling per sqrt(mW); gives a 1 MHz EIT FWHM at 40 mW for the default ensemble
RABI_PER_SQRT_MW = 2.157036e6
SAMPLES_PER_PERIOD = 20


def photon_flux(power_w: float, wavelength: float = CS_D2_WAVELENGTH) -> float:
    """Photons per second carried by ``power_w`` watts."""
    return power_w * wavelength / (PLANCK * C_LIGHT)


def amplitude_for_power(power_w: float, duration: float, wavelength: float = CS_D2_WAVELENGTH) -> float:
    """Amplitude in shot-noise units, sqrt(2 N), of a pulse carrying N photons on average."""
    return math.sqrt(2 * photon_flux(power_w, wavelength) * duration)


@dataclass(frozen=True)
class SidebandSpec:
    """Weak signal pulse.

    ``offset`` is the angular sideband frequency; ``amplitude`` is in shot-noise
    units: a matched demodulation of the main sideband alone returns
    (amplitude cos(phase), amplitude sin(phase)), and the pulse carries
    amplitude**2 / 2 photons.  Dual mode splits the same photon number over
    both sidebands.  ``suppression_db`` sets the residual image sideband in
    single mode.
    """

    mode: str = "single"
    offset: float = 2 * math.pi * 1.25e6
    amplitude: float = 10.0
    phase: float = 0.0
    suppression_db: float = 20.0
    duration: float = 5e-6
    start: float = 0.5e-6
    shape: str = "rectangular"
    edge_time: float = 0.1e-6

    def __post_init__(self):
        if self.mode not in ("single", "dual"):
            raise ConfigError(f"unknown mode {self.mode!r}", "signal.mode")
        if self.shape not in ("rectangular", "gaussian"):
            raise ConfigError(f"unknown shape {self.shape!r}", "signal.shape")
        if self.amplitude < 0:
            raise ConfigError("must be non-negative", "signal.amplitude")
        if self.suppression_db < 0:
            raise ConfigError("must be non-negative", "signal.suppression_db")
        if not self.duration > 0:
            raise ConfigError("must be positive", "signal.duration")
        if self.offset < 0:
            raise ConfigError("must be non-negative", "signal.offset")
        if self.shape == "rectangular" and not self.edge_time > 0:
            raise ConfigError("must be positive", "signal.edge_time")

    @property
    def carrier(self) -> float:
        """Frame of the envelope handed to the medium."""
        return self.offset if self.mode == "single" else 0.0

    @property
    def image_ratio(self) -> float:
        return 10 ** (-self.suppression_db / 20)

    @property
    def end(self) -> float:
        return self.start + self.duration


def _shape(spec: SidebandSpec, t: np.ndarray) -> np.ndarray:
    if spec.shape == "gaussian":
        sigma = spec.duration / (2 * math.sqrt(2 * math.log(2)))
        return np.exp(-0.5 * ((t - spec.start - spec.duration / 2) / sigma) ** 2)
    return 0.5 * (np.tanh((t - spec.start) / spec.edge_time) - np.tanh((t - spec.end) / spec.edge_time))


def pulse_shape(spec: SidebandSpec, t) -> np.ndarray:
    """Real pulse profile normalized to unit time-integrated square."""
    width = spec.edge_time if spec.shape == "rectangular" else spec.duration
    dense = np.linspace(spec.start - 10 * width, spec.end + 10 * width, 200_001)
    norm = np.trapezoid(_shape(spec, dense) ** 2, dense)
    return _shape(spec, np.asarray(t, dtype=float)) / math.sqrt(norm)


def make_signal(spec: SidebandSpec, grid: TimeGrid) -> FieldEnvelope:
    """Signal envelope on ``grid`` in the frame of ``spec.carrier``.

    Single mode: main sideband at -offset from the local oscillator plus an image
    at +offset with relative amplitude ``spec.image_ratio`` and the same phase.
    Dual mode: two equal sidebands at +/-offset (amplitude modulation).
    """
    if spec.offset > 0 and grid.dt > 2 * math.pi / (SAMPLES_PER_PERIOD * spec.offset):
        raise ConfigError(
            f"grid step {grid.dt:.3g} s does not resolve the {spec.offset / 2 / math.pi:.4g} Hz sideband",
            "numerics.dt",
        )
    t = grid.t
    base = spec.amplitude / math.sqrt(2) * pulse_shape(spec, t) * np.exp(1j * spec.phase)
    if spec.mode == "single":
        values = base * (1 + spec.image_ratio * np.exp(2j * spec.offset * t))
    else:
        values = math.sqrt(2) * base * np.cos(spec.offset * t)
    return FieldEnvelope(grid.t0, grid.dt, values, spec.carrier)


@dataclass(frozen=True)
class SequenceTiming:
    """Sequence durations in seconds.

    The write stage starts at t = 0 with the control turning on and ends at the
    control switch-off ``write``; ``read`` counts from the read turn-on.  Pumping
    and the dark period precede t = 0 and are not simulated.
    """

    pump: float = 6e-3
    dark: float = 0.5e-3
    write: float = 5.5e-6
    storage: float = 20e-6
    read: float = 8e-6

    def __post_init__(self):
        for name in ("pump", "dark", "write", "storage", "read"):
            if getattr(self, name) < 0:
                raise ConfigError("must be non-negative", f"timing.{name}")
        if self.storage > 1e-3:
            warnings.warn("storage time above 1 ms", stacklevel=3)

    @property
    def switch_off(self) -> float:
        return self.write

    @property
    def switch_on(self) -> float:
        return self.write + self.storage

    @property
    def end(self) -> float:
        return self.write + self.storage + self.read


@dataclass(frozen=True)
class ControlProfile:
    """Control beam power (mW), coupling calibration, gate ramps and detection-channel leak."""

    power: float = 10.0
    rabi_calibration: float = RABI_PER_SQRT_MW
    ramp_time: float = 0.2e-6
    leak_fraction: float = 1e-5
    leak_frequency: float = 2 * math.pi * 1.2e6
    leak_width: float = 0.4e-6
    leak_jitter: float = 0.0

    def __post_init__(self):
        if self.power < 0:
            raise ConfigError("must be non-negative", "control.power")
        if not self.ramp_time > 0:
            raise ConfigError("must be positive", "control.ramp_time")
        if not 0 <= self.leak_fraction <= 1e-2:
            raise ConfigError("must lie in [0, 1e-2]", "control.leak_fraction")
        if not self.leak_width > 0:
            raise ConfigError("must be positive", "control.leak_width")
        if self.leak_jitter < 0:
            raise ConfigError("must be non-negative", "control.leak_jitter")

    @property
    def rabi(self) -> float:
        """Control coupling with the gate fully open (rad/s)."""
        return self.rabi_calibration * math.sqrt(self.power)


def _ramp(t: np.ndarray, edge: float, width: float) -> np.ndarray:
    x = np.clip((t - edge) / width + 0.5, 0.0, 1.0)
    return 0.5 * (1 - np.cos(math.pi * x))


def control_gate(timing: SequenceTiming, ramp_time: float, t) -> np.ndarray:
    """Smooth 0..1 gate: on for the write stage, off during storage, on for the read stage."""
    t = np.asarray(t, dtype=float)
    on_write = _ramp(t, 0.0, ramp_time) * (1 - _ramp(t, timing.switch_off, ramp_time))
    on_read = _ramp(t, timing.switch_on, ramp_time) * (1 - _ramp(t, timing.end, ramp_time))
    return on_write + on_read


def make_control(profile: ControlProfile, timing: SequenceTiming, grid: TimeGrid) -> tuple[Trace, FieldEnvelope]:
    """Control coupling trace and the deterministic leak into the signal channel.

    The leak is a wavepacket at ``leak_frequency`` centered on every gate edge,
    signed like the edge and scaled by ``leak_fraction`` times the control
    amplitude in sqrt(photons/s).  It is written in the local-oscillator frame.
    """
    if timing.storage < profile.ramp_time:
        raise ConfigError("storage shorter than the control ramp: write and read windows overlap", "timing.storage")
    if timing.write < profile.ramp_time or timing.read < profile.ramp_time:
        raise ConfigError("write and read windows must exceed the control ramp", "timing")
    t = grid.t
    rabi = Trace(grid.t0, grid.dt, profile.rabi * control_gate(timing, profile.ramp_time, t))
    leak = np.zeros(grid.n)
    if profile.leak_fraction > 0 and profile.power > 0:
        amp = profile.leak_fraction * math.sqrt(photon_flux(profile.power * 1e-3))
        for edge, sign in ((0.0, 1), (timing.switch_off, -1), (timing.switch_on, 1), (timing.end, -1)):
            x = t - edge
            leak += sign * np.exp(-0.5 * (x / profile.leak_width) ** 2) * np.cos(profile.leak_frequency * x)
        leak *= amp
    return rabi, FieldEnvelope(grid.t0, grid.dt, leak, 0.0)
