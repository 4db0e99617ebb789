"""Linearized three-level Lambda medium: EIT response, writing, storage, read-out.

Dynamics use a co-moving frame, lengths normalized to the cell (z in [0, 1])
and rates in units of the optical coherence decay ``gamma_optical``:

    dE/dz = i c P
    dP/dt = -(1 + i Delta) P + i c E + i Omega_c S
    dS/dt = -(gamma_0 + i delta) S + i Omega_c P

with ``c = sqrt(d_eff / 2)`` so that with the control off the resonant field
amplitude is attenuated by exp(-d_eff / 2).  ``Omega_c`` is the control coupling
appearing in these equations (rad/s before normalization).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NumericsError
from .fields import FieldEnvelope, Trace

TAU_MEMORY = 10e-6


@dataclass(frozen=True)
class EnsembleParams:
    """Atomic medium.  Rates and detunings are angular (rad/s).

    ``optical_depth`` is the resonant intensity optical depth; the fraction of
    atoms pumped into the storage sublevel scales the light-atom coupling.
    ``cell_length`` is metadata only.
    """

    optical_depth: float = 10.0
    gamma_optical: float = 2 * math.pi * 2.6e6
    gamma_spin: float = 1 / TAU_MEMORY
    one_photon_detuning: float = 0.0
    cell_length: float = 0.03
    pump_fraction: float = 0.9

    def __post_init__(self):
        if not self.optical_depth > 0:
            raise ConfigError("must be positive", "ensemble.optical_depth")
        if not self.gamma_optical > 0:
            raise ConfigError("must be positive", "ensemble.gamma_optical")
        if self.gamma_spin < 0:
            raise ConfigError("must be non-negative", "ensemble.gamma_spin")
        if not 0 <= self.pump_fraction <= 1:
            raise ConfigError("must lie in [0, 1]", "ensemble.pump_fraction")
        if self.gamma_spin > 0.1 * self.gamma_optical:
            warnings.warn("gamma_spin is not small compared with gamma_optical", stacklevel=3)

    @property
    def effective_depth(self) -> float:
        return self.optical_depth * self.pump_fraction


@dataclass(frozen=True)
class Numerics:
    """Discretization of the method-of-lines integrator.

    The time step must satisfy ``dt * max_rate <= step_factor`` where
    ``max_rate`` is the largest of gamma_optical, the peak control coupling,
    |Delta| and |delta|.
    """

    n_z: int = 256
    step_factor: float = 0.1
    check_every: int = 200

    def __post_init__(self):
        if self.n_z < 2:
            raise ConfigError("need at least two spatial points", "numerics.n_z")
        if not self.step_factor > 0:
            raise ConfigError("must be positive", "numerics.step_factor")

    def max_dt(self, params: EnsembleParams, rabi_peak: float, delta: float = 0.0) -> float:
        rate = max(params.gamma_optical, abs(rabi_peak), abs(params.one_photon_detuning), abs(delta))
        return self.step_factor / rate

    def substeps(self, coarse_dt: float, params: EnsembleParams, rabi_peak: float, delta: float = 0.0) -> int:
        """Smallest integer subdivision of ``coarse_dt`` meeting the step bound."""
        return max(1, math.ceil(coarse_dt / self.max_dt(params, rabi_peak, delta) - 1e-9))


@dataclass
class SpinWave:
    """Ground-state coherence S(z) on the spatial grid, written in the frame of ``carrier``."""

    values: np.ndarray
    created_at: float
    carrier: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(self.values)):
            raise NumericsError("spin wave contains non-finite values")

    def norm(self) -> float:
        """L2 norm over z in [0, 1]."""
        return float(np.sqrt(np.trapezoid(np.abs(self.values) ** 2, dx=1 / (len(self.values) - 1))))


def weak_probe_susceptibility(params: EnsembleParams, control_rabi: float, detuning: float, delta: float) -> complex:
    """Normalized linear response of the medium to the weak signal.

    Returns kappa with field amplitude transmission ``exp(-d_eff * kappa / 2)``;
    kappa = 1 for a resonant signal with the control off.
    """
    if control_rabi < 0:
        raise ValueError("control_rabi must be non-negative")
    g = params.gamma_optical
    spin = params.gamma_spin + 1j * delta
    denom = (g + 1j * detuning) * spin + control_rabi**2
    if denom == 0:
        raise ZeroDivisionError("singular susceptibility: no damping at exact resonance")
    return complex(g * spin / denom)


def transmission(params: EnsembleParams, control_rabi: float, probe_detuning) -> np.ndarray:
    """Intensity transmission versus signal detuning from two-photon resonance.

    Scanning the signal frequency moves one- and two-photon detunings together.
    """
    probe_detuning = np.asarray(probe_detuning, dtype=float)
    g = params.gamma_optical
    spin = params.gamma_spin + 1j * probe_detuning
    opt = g + 1j * (params.one_photon_detuning + probe_detuning)
    kappa = g * spin / (opt * spin + control_rabi**2)
    return np.exp(-params.effective_depth * kappa.real)


def eit_fwhm(params: EnsembleParams, control_rabi: float) -> float:
    """Full width at half maximum (rad/s) of the EIT transmission peak at delta = 0."""
    if not control_rabi > 0:
        raise ValueError("control_rabi must be positive")
    peak = float(transmission(params, control_rabi, 0.0))
    half = peak / 2
    scale = control_rabi**2 / params.gamma_optical
    probe = 1e-3 * scale
    if transmission(params, control_rabi, probe) >= peak or transmission(params, control_rabi, -probe) >= peak:
        raise NumericsError("no EIT window: transmission has no peak at two-photon resonance")

    def edge(sign):
        lo, hi = 0.0, probe
        limit = 50 * (params.gamma_optical + control_rabi + abs(params.one_photon_detuning))
        while transmission(params, control_rabi, sign * hi) > half:
            lo, hi = hi, 2 * hi
            if hi > limit:
                raise NumericsError("no EIT window: transmission never falls to half maximum")
        return brentq(lambda x: float(transmission(params, control_rabi, sign * x)) - half, lo, hi, xtol=1e-12 * hi)

    return edge(1) + edge(-1)


def _cumtrapz(y: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(y)
    out[0] = 0
    np.cumsum((y[1:] + y[:-1]) * (h / 2), out=out[1:])
    return out


def _check_grid(signal: Trace, control: Trace):
    if not math.isclose(signal.dt, control.dt, rel_tol=1e-9):
        raise ConfigError(f"signal dt {signal.dt} differs from control dt {control.dt}", "numerics.dt")
    if len(signal.values) != len(control.values) or not math.isclose(signal.t0, control.t0, abs_tol=1e-3 * signal.dt):
        raise ConfigError("signal and control traces cover different time spans", "numerics.grid")


def simulate(
    signal_in: FieldEnvelope,
    control: Trace,
    params: EnsembleParams,
    delta: float,
    numerics: Numerics = Numerics(),
    spin0: np.ndarray | None = None,
    keep_spacetime: bool = False,
) -> tuple[FieldEnvelope, SpinWave]:
    """Integrate the Lambda system over the span of ``signal_in``.

    Returns the field leaving the cell (z = 1) and the spin wave at the last
    sample.  Optical polarization starts at zero.
    """
    _check_grid(signal_in, control)
    rabi = np.asarray(control.values, dtype=float)
    bound = numerics.max_dt(params, float(np.max(np.abs(rabi), initial=0.0)), delta)
    if signal_in.dt > bound * (1 + 1e-9):
        raise NumericsError(f"time step {signal_in.dt:.3g} s exceeds stability bound {bound:.3g} s")

    g = params.gamma_optical
    h = signal_in.dt * g
    nz = numerics.n_z
    hz = 1.0 / (nz - 1)
    c = math.sqrt(params.effective_depth / 2)
    dec_p = 1 + 1j * params.one_photon_detuning / g
    dec_s = params.gamma_spin / g + 1j * delta / g
    om = rabi / g
    ein = signal_in.values

    P = np.zeros(nz, complex)
    S = np.zeros(nz, complex) if spin0 is None else np.array(spin0, dtype=complex)
    if len(S) != nz:
        raise ConfigError(f"spin wave has {len(S)} points, numerics expects {nz}", "numerics.n_z")

    def field(P, e0):
        return e0 + 1j * c * _cumtrapz(P, hz)

    def rhs(P, S, e0, w):
        E = field(P, e0)
        return -dec_p * P + 1j * c * E + 1j * w * S, -dec_s * S + 1j * w * P

    n = len(ein)
    out = np.empty(n, complex)
    space = np.empty((nz, n), complex) if keep_spacetime else None
    for k in range(n):
        E = field(P, ein[k])
        out[k] = E[-1]
        if space is not None:
            space[:, k] = E
        if k == n - 1:
            break
        e_mid = 0.5 * (ein[k] + ein[k + 1])
        w_mid = 0.5 * (om[k] + om[k + 1])
        k1p, k1s = rhs(P, S, ein[k], om[k])
        k2p, k2s = rhs(P + 0.5 * h * k1p, S + 0.5 * h * k1s, e_mid, w_mid)
        k3p, k3s = rhs(P + 0.5 * h * k2p, S + 0.5 * h * k2s, e_mid, w_mid)
        k4p, k4s = rhs(P + h * k3p, S + h * k3s, ein[k + 1], om[k + 1])
        P = P + (h / 6) * (k1p + 2 * k2p + 2 * k3p + k4p)
        S = S + (h / 6) * (k1s + 2 * k2s + 2 * k3s + k4s)
        if k % numerics.check_every == 0 and not (np.all(np.isfinite(P)) and np.all(np.isfinite(S))):
            raise NumericsError(f"integration diverged at step {k} (t = {signal_in.t0 + k * signal_in.dt:.4g} s)")
    if not (np.all(np.isfinite(out)) and np.all(np.isfinite(S))):
        raise NumericsError("integration diverged before the final step")

    envelope = FieldEnvelope(signal_in.t0, signal_in.dt, out, signal_in.carrier)
    envelope.spacetime = space
    t_last = signal_in.t0 + (n - 1) * signal_in.dt
    return envelope, SpinWave(S, t_last, signal_in.carrier)


def propagate_write(
    signal_in: FieldEnvelope,
    control: Trace,
    params: EnsembleParams,
    delta: float,
    numerics: Numerics = Numerics(),
    keep_spacetime: bool = False,
) -> tuple[FieldEnvelope, SpinWave]:
    """Writing stage: transmitted field and the spin wave frozen at the end of the span."""
    return simulate(signal_in, control, params, delta, numerics, keep_spacetime=keep_spacetime)


def store(spin: SpinWave, duration: float, delta: float, params: EnsembleParams) -> SpinWave:
    """Dark storage: S -> S * exp(-(gamma_spin + i delta) * duration)."""
    if duration < 0:
        raise ValueError("storage duration must be non-negative")
    factor = np.exp(-(params.gamma_spin + 1j * delta) * duration)
    return SpinWave(spin.values * factor, spin.created_at + duration, spin.carrier)


def read(
    spin: SpinWave,
    control: Trace,
    params: EnsembleParams,
    numerics: Numerics = Numerics(),
    delta: float = 0.0,
    keep_spacetime: bool = False,
) -> FieldEnvelope:
    """Read-out: field emitted at z = 1 from ``spin`` with no signal input."""
    vacuum = FieldEnvelope(control.t0, control.dt, np.zeros(len(control.values)), spin.carrier)
    out, _ = simulate(vacuum, control, params, delta, numerics, spin0=spin.values, keep_spacetime=keep_spacetime)
    return out


def amplitude_efficiency(reference: FieldEnvelope, retrieved: FieldEnvelope) -> float:
    """Root-energy ratio of ``retrieved`` to ``reference``."""
    ref = reference.energy()
    if ref <= 0:
        raise ValueError("reference envelope has zero energy")
    return math.sqrt(retrieved.energy() / ref)
