"""Ready-made configurations."""
from __future__ import annotations

import dataclasses

from ..signal_synth import amplitude_for_power
from .config import DetectionSettings, RunConfig


def replication_config(**overrides) -> RunConfig:
    """Laboratory-like settings: 5 us pulse at 0.1 nW, 9 mW control, d = 10.

    The larger ADC range keeps the ~0.1 nW pulse below full scale.
    """
    base = RunConfig()
    cfg = dataclasses.replace(
        base,
        signal=dataclasses.replace(base.signal, amplitude=amplitude_for_power(1e-10, 5e-6), duration=5e-6),
        control=dataclasses.replace(base.control, power=9.0),
        detection=DetectionSettings(full_scale=16.0),
    )
    for path, value in overrides.items():
        cfg = cfg.with_value(path.replace("__", "."), value)
    return cfg


def tv_config(efficiency: float = 0.1, amplitude: float = 10.0, excess_noise: float = 0.0, **overrides) -> RunConfig:
    """Pure-loss memory for T-V benchmarking at a 45 degree signal phase.

    The control leak is switched off: an ideal lossy channel adds nothing to
    the read window.  Nothing is transmitted, so efficiency refers to the input.
    """
    base = RunConfig()
    cfg = dataclasses.replace(
        base,
        memory_model="pure-loss",
        pure_loss_efficiency=efficiency,
        signal=dataclasses.replace(base.signal, amplitude=amplitude),
        control=dataclasses.replace(base.control, leak_fraction=0.0),
        detection=dataclasses.replace(base.detection, excess_noise=excess_noise, efficiency_reference="input"),
    )
    for path, value in overrides.items():
        cfg = cfg.with_value(path.replace("__", "."), value)
    return cfg


PRESETS = {"default": RunConfig, "replication": replication_config, "tv": tv_config}
