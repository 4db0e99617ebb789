"""Zeeman tuning of the two-photon resonance.

The signal and control beams address ground sublevels two Zeeman steps apart, so
the two-photon resonance sits at twice the Larmor frequency.  All frequencies
returned here are angular (rad/s); the constants are kept in MHz/G.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

COIL_RANGE_GAUSS = (0.0, 2.0)
BOHR_MHZ_PER_GAUSS = 1.399624


@dataclass(frozen=True)
class ZeemanConfig:
    """Magnetic field and ground-state g factor.

    ``lande_g`` is the magnitude of g_F for Cs 6S1/2 F=3; its sign is irrelevant
    because only frequency magnitudes enter the observables.
    """

    magnetic_field_H: float = 1.786
    lande_g: float = 0.25
    bohr_frequency_per_gauss: float = BOHR_MHZ_PER_GAUSS

    def __post_init__(self):
        if not (self.lande_g > 0 and self.bohr_frequency_per_gauss > 0):
            raise ValueError("lande_g and bohr_frequency_per_gauss must be positive")
        if not math.isfinite(self.magnetic_field_H):
            raise ValueError("magnetic_field_H must be finite")
        lo, hi = COIL_RANGE_GAUSS
        if not lo <= self.magnetic_field_H <= hi:
            warnings.warn(
                f"magnetic field {self.magnetic_field_H} G outside coil range {COIL_RANGE_GAUSS}",
                stacklevel=3,
            )

    @property
    def _angular_per_gauss(self) -> float:
        return 2 * math.pi * 1e6 * self.bohr_frequency_per_gauss * self.lande_g


def larmor_frequency(cfg: ZeemanConfig) -> float:
    """Angular Larmor frequency mu_B * g * H in rad/s."""
    return cfg._angular_per_gauss * cfg.magnetic_field_H


def resonance_field(target_omega: float, cfg: ZeemanConfig = ZeemanConfig()) -> float:
    """Field (gauss) putting the two-photon resonance at ``target_omega``.

    Solves 2 * mu_B * g * H = target_omega.
    """
    if not math.isfinite(target_omega):
        raise ValueError("target frequency must be finite")
    if target_omega < 0:
        raise ValueError("target frequency must be non-negative")
    return target_omega / (2 * cfg._angular_per_gauss)


def two_photon_detuning(cfg: ZeemanConfig, omega: float) -> float:
    """delta = 2 * Omega_L - omega, in rad/s."""
    return 2 * larmor_frequency(cfg) - omega


def tuned(cfg: ZeemanConfig, omega: float, larmor_offset: float = 0.0) -> ZeemanConfig:
    """Copy of ``cfg`` with H set to resonance at ``omega`` plus a Larmor offset (rad/s)."""
    h = resonance_field(omega, cfg) + larmor_offset / cfg._angular_per_gauss
    return ZeemanConfig(h, cfg.lande_g, cfg.bohr_frequency_per_gauss)
