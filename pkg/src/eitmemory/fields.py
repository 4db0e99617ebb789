"""Time grids and sampled complex envelopes."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling ``t0 + k*dt`` for ``k in range(n)`` (seconds)."""

    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n < 1:
            raise ValueError("grid needs at least one sample")

    @classmethod
    def spanning(cls, t_start: float, t_stop: float, dt: float) -> "TimeGrid":
        n = int(np.floor((t_stop - t_start) / dt + 1e-9)) + 1
        return cls(t_start, dt, n)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.n - 1)

    def index(self, time: float) -> int:
        return int(round((time - self.t0) / self.dt))


@dataclass
class Trace:
    """A sampled time series on a uniform grid."""

    t0: float
    dt: float
    values: np.ndarray

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.t0, self.dt, len(self.values))

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def decimate(self, factor: int) -> "Trace":
        extra = {"spacetime": None} if hasattr(self, "spacetime") else {}
        return replace(self, dt=self.dt * factor, values=self.values[::factor], **extra)


@dataclass
class FieldEnvelope(Trace):
    """Slowly varying complex field amplitude in sqrt(photons/s).

    The envelope is written in a frame offset by ``carrier`` (rad/s) below the
    local oscillator: the field seen by the homodyne detector is
    ``values * exp(-1j * carrier * t)``.  ``|values|**2 * dt`` is the mean photon
    number in a bin.  ``spacetime`` optionally holds the field on the (z, t) grid.
    """

    carrier: float = 0.0
    spacetime: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field envelope contains non-finite values")

    def lo_frame(self) -> np.ndarray:
        return self.values * np.exp(-1j * self.carrier * self.t)

    def energy(self) -> float:
        """Time-integrated |E|^2, i.e. mean photon number."""
        return float(np.sum(np.abs(self.values) ** 2) * self.dt)

    def with_values(self, values) -> "FieldEnvelope":
        return FieldEnvelope(self.t0, self.dt, values, self.carrier)

    def resample(self, grid: TimeGrid) -> "FieldEnvelope":
        """Linear interpolation onto ``grid`` in the envelope frame; zero outside."""
        t = self.t
        re = np.interp(grid.t, t, self.values.real, left=0.0, right=0.0)
        im = np.interp(grid.t, t, self.values.imag, left=0.0, right=0.0)
        return FieldEnvelope(grid.t0, grid.dt, re + 1j * im, self.carrier)

    def reframe(self, carrier: float) -> "FieldEnvelope":
        """Same physical field written relative to a different carrier offset."""
        phase = np.exp(1j * (carrier - self.carrier) * self.t)
        return FieldEnvelope(self.t0, self.dt, self.values * phase, carrier)
