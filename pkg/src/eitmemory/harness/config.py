"""Run configuration: nested dataclasses, JSON round-trip and cross-field validation."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

from ..eit_medium import EnsembleParams, Numerics
from ..errors import ConfigError
from ..homodyne import HomodyneConfig
from ..signal_synth import ControlProfile, SequenceTiming, SidebandSpec
from ..zeeman import ZeemanConfig

T_ANCHORS = ((30.0, 6.0), (40.0, 18.0))


def optical_depth_from_temperature(temperature_c: float) -> float:
    """Log-linear interpolation through (30 C, d=6) and (40 C, d=18)."""
    (t1, d1), (t2, d2) = T_ANCHORS
    return d1 * (d2 / d1) ** ((temperature_c - t1) / (t2 - t1))


@dataclass(frozen=True)
class DetectionSettings:
    """Acquisition plus analysis choices.

    Excess noise (in shot units) is ``excess_noise + excess_noise_slope *
    max(0, P_control - excess_noise_threshold)`` with powers in mW.
    ``profile`` selects matched (from a macroscopic record at
    ``macroscopic_power`` watts) or flat ``n_periods`` demodulation.
    """

    sample_rate: float = 5e7
    adc_bits: int = 14
    full_scale: float = 8.0
    excess_noise: float = 0.0
    excess_noise_slope: float = 0.0
    excess_noise_threshold: float = 10.0
    profile: str = "matched"
    n_periods: int = 2
    subtract: bool = False
    macroscopic_power: float = 4e-6
    efficiency_reference: str = "transmitted"

    def __post_init__(self):
        HomodyneConfig(self.sample_rate, self.adc_bits, self.full_scale)
        if self.profile not in ("matched", "flat"):
            raise ConfigError(f"unknown profile {self.profile!r}", "detection.profile")
        if self.n_periods not in (2, 3, 4):
            raise ConfigError("must be 2, 3 or 4", "detection.n_periods")
        if self.efficiency_reference not in ("transmitted", "input"):
            raise ConfigError("must be 'transmitted' or 'input'", "detection.efficiency_reference")
        if self.excess_noise < 0 or self.excess_noise_slope < 0:
            raise ConfigError("excess noise terms must be non-negative", "detection.excess_noise")

    @property
    def homodyne(self) -> HomodyneConfig:
        return HomodyneConfig(self.sample_rate, self.adc_bits, self.full_scale)

    def excess_for(self, control_power: float) -> float:
        return self.excess_noise + self.excess_noise_slope * max(0.0, control_power - self.excess_noise_threshold)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one simulated experiment.

    ``memory_model`` is ``"maxwell-bloch"`` or ``"pure-loss"``; the latter
    replays the input pulse in the read window scaled by
    ``pure_loss_efficiency`` (amplitude).  With ``tune_field`` the magnetic
    field is set to two-photon resonance for the signal carrier, shifted by
    ``larmor_offset`` (rad/s).  ``temperature_c``, when given, sets the optical
    depth.  The signal phase defaults to 45 degrees so that both input
    quadratures carry signal and the transfer coefficient is defined.
    """

    ensemble: EnsembleParams = EnsembleParams()
    zeeman: ZeemanConfig = ZeemanConfig()
    signal: SidebandSpec = SidebandSpec(phase=math.pi / 4)
    control: ControlProfile = ControlProfile()
    timing: SequenceTiming = SequenceTiming()
    detection: DetectionSettings = DetectionSettings()
    numerics: Numerics = Numerics()
    realizations: int = 2000
    base_seed: int = 1234
    temperature_c: float | None = None
    tune_field: bool = True
    larmor_offset: float = 0.0
    memory_model: str = "maxwell-bloch"
    pure_loss_efficiency: float = 0.1
    tail: float = 1e-6

    def __post_init__(self):
        if self.realizations < 0:
            raise ConfigError("must be non-negative", "realizations")
        if self.memory_model not in ("maxwell-bloch", "pure-loss"):
            raise ConfigError(f"unknown model {self.memory_model!r}", "memory_model")
        if not 0 <= self.pure_loss_efficiency <= 1:
            raise ConfigError("must lie in [0, 1]", "pure_loss_efficiency")
        if self.base_seed < 0:
            raise ConfigError("must be non-negative", "base_seed")
        validate(self)

    def resolved_ensemble(self) -> EnsembleParams:
        if self.temperature_c is None:
            return self.ensemble
        return dataclasses.replace(self.ensemble, optical_depth=optical_depth_from_temperature(self.temperature_c))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(cls(), data, "")

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    def with_value(self, path: str, value) -> "RunConfig":
        """Copy with the dotted field ``path`` set to ``value``."""
        return _replace_path(self, path.split("."), value, path)


def _build(default, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError("expected an object", prefix.rstrip(".") or "<root>")
    known = {f.name for f in dataclasses.fields(default)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError("unknown field", prefix + key)
        current = getattr(default, key)
        kwargs[key] = _build(current, value, f"{prefix}{key}.") if dataclasses.is_dataclass(current) else value
    try:
        return dataclasses.replace(default, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), prefix.rstrip(".") or "<root>") from None


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _replace_path(obj, parts, value, full):
    name = parts[0]
    if not dataclasses.is_dataclass(obj) or name not in {f.name for f in dataclasses.fields(obj)}:
        raise ConfigError("unknown configuration path", full)
    current = getattr(obj, name)
    if len(parts) > 1:
        value = _replace_path(current, parts[1:], value, full)
    elif dataclasses.is_dataclass(current):
        raise ConfigError("path names a section, not a field", full)
    elif (_is_number(current) or current is None) and not _is_number(value):
        raise ConfigError(f"expected a number, got {value!r}", full)
    elif isinstance(current, (bool, str)) and type(value) is not type(current):
        raise ConfigError(f"expected {type(current).__name__}, got {value!r}", full)
    if isinstance(current, int) and not isinstance(current, bool) and _is_number(value):
        if value != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", full)
        value = int(value)
    try:
        return dataclasses.replace(obj, **{name: value})
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), full) from None


def validate(cfg: RunConfig) -> None:
    """Cross-field checks; raises ConfigError naming the field path."""
    sig, tim, det, ctl = cfg.signal, cfg.timing, cfg.detection, cfg.control
    if sig.offset > 0 and det.sample_rate <= 20 * sig.offset / (2 * math.pi):
        raise ConfigError(
            f"{det.sample_rate:.4g} S/s does not exceed 20x the {sig.offset / 2 / math.pi:.4g} Hz sideband",
            "detection.sample_rate",
        )
    if sig.offset == 0:
        raise ConfigError("sideband frequency must be positive for demodulation", "signal.offset")
    if sig.start < 0:
        raise ConfigError("signal must start at or after t = 0", "signal.start")
    if sig.end > tim.write + ctl.ramp_time / 2:
        raise ConfigError("signal pulse extends past the control switch-off", "timing.write")
    if tim.storage < ctl.ramp_time:
        raise ConfigError("storage shorter than the control ramp", "timing.storage")
    if tim.read < ctl.ramp_time or tim.write < ctl.ramp_time:
        raise ConfigError("write and read stages must exceed the control ramp", "timing.read")
    if cfg.memory_model == "pure-loss" and sig.end > tim.read:
        raise ConfigError("pure-loss replay does not fit in the read stage", "timing.read")
    if cfg.tail < 0:
        raise ConfigError("must be non-negative", "tail")
