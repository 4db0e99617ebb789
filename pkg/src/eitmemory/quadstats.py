"""Ensemble statistics of quadrature samples and the T-V memory benchmark."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError

STAGES = ("input", "transmitted", "retrieved")


@dataclass
class QuadratureSamples:
    """Per-realization (X, Y) measurements of one stage, in shot-noise units."""

    X: np.ndarray
    Y: np.ndarray
    stage: str = "input"
    realization_id: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.shape != self.Y.shape or self.X.ndim != 1:
            raise ValueError("X and Y must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise ValueError("quadrature samples must be finite")
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.realization_id is None:
            self.realization_id = np.arange(len(self.X))
        self.realization_id = np.asarray(self.realization_id)

    def __len__(self):
        return len(self.X)

    def scaled(self, factor: float) -> "QuadratureSamples":
        return QuadratureSamples(self.X * factor, self.Y * factor, self.stage, self.realization_id)


class MomentAccumulator:
    """Running count, mean and co-moment matrix of vector samples.

    Partial accumulators merge exactly (pairwise update of Chan et al.), so
    batches may be processed by independent workers in any grouping.
    """

    def __init__(self, dim: int):
        self.n = 0
        self.mean = np.zeros(dim)
        self.comoment = np.zeros((dim, dim))

    def update(self, batch) -> "MomentAccumulator":
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        other = MomentAccumulator(batch.shape[1])
        other.n = len(batch)
        other.mean = batch.mean(axis=0)
        centered = batch - other.mean
        other.comoment = centered.T @ centered
        return self.merge(other)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.n == 0:
            return self
        n = self.n + other.n
        diff = other.mean - self.mean
        self.comoment = self.comoment + other.comoment + np.outer(diff, diff) * (self.n * other.n / n)
        self.mean = self.mean + diff * (other.n / n)
        self.n = n
        return self

    def covariance(self) -> np.ndarray:
        if self.n < 2:
            raise UndefinedMetricError("need at least two samples for a variance")
        return self.comoment / (self.n - 1)


@dataclass
class QuadratureStats:
    """Means, unbiased variances and (when paired) centered input-output covariances."""

    mean_X: float
    mean_Y: float
    var_X: float
    var_Y: float
    count: int
    covariance_in_out_X: float | None = None
    covariance_in_out_Y: float | None = None
    stage: str = "input"

    @classmethod
    def from_accumulator(cls, acc: MomentAccumulator, stage: str = "input") -> "QuadratureStats":
        cov = acc.covariance()
        return cls(float(acc.mean[0]), float(acc.mean[1]), float(cov[0, 0]), float(cov[1, 1]), acc.n, stage=stage)


def ensemble_stats(samples: QuadratureSamples) -> QuadratureStats:
    """Sample means and unbiased variances of one stage."""
    if len(samples) < 2:
        raise UndefinedMetricError("need at least two realizations")
    acc = MomentAccumulator(2).update(np.column_stack([samples.X, samples.Y]))
    return QuadratureStats.from_accumulator(acc, samples.stage)


def paired_accumulator(inp: QuadratureSamples, out: QuadratureSamples) -> MomentAccumulator:
    """Accumulator over columns (X_in, Y_in, X_out, Y_out) of realization-matched samples."""
    if len(inp) != len(out) or not np.array_equal(inp.realization_id, out.realization_id):
        raise ValueError("input and output samples are not paired realization by realization")
    return MomentAccumulator(4).update(np.column_stack([inp.X, inp.Y, out.X, out.Y]))


def paired_stats_from(acc: MomentAccumulator, out_stage: str = "retrieved") -> tuple[QuadratureStats, QuadratureStats]:
    cov = acc.covariance()
    m = acc.mean
    in_stats = QuadratureStats(m[0], m[1], cov[0, 0], cov[1, 1], acc.n, stage="input")
    out_stats = QuadratureStats(m[2], m[3], cov[2, 2], cov[3, 3], acc.n, cov[0, 2], cov[1, 3], stage=out_stage)
    return in_stats, out_stats


def paired_stats(inp: QuadratureSamples, out: QuadratureSamples) -> tuple[QuadratureStats, QuadratureStats]:
    """Input and output statistics with the output carrying in/out covariances."""
    if len(inp) < 2:
        raise UndefinedMetricError("need at least two realizations")
    return paired_stats_from(paired_accumulator(inp, out), out.stage)


def conditional_variances(in_stats: QuadratureStats, out_stats: QuadratureStats) -> tuple[float, float, float]:
    """(V_X, V_Y, V) with V_q = V_q^out - cov_q^2 / V_q^in and V = sqrt(V_X V_Y)."""
    if out_stats.covariance_in_out_X is None or out_stats.covariance_in_out_Y is None:
        raise ValueError("output statistics carry no input pairing")
    if in_stats.var_X <= 0 or in_stats.var_Y <= 0:
        raise UndefinedMetricError("conditional variance undefined for zero input variance")
    vx = out_stats.var_X - out_stats.covariance_in_out_X**2 / in_stats.var_X
    vy = out_stats.var_Y - out_stats.covariance_in_out_Y**2 / in_stats.var_Y
    return vx, vy, math.sqrt(max(vx, 0.0) * max(vy, 0.0))


def signal_to_noise(stats: QuadratureStats) -> tuple[float, float]:
    """R = 4 * mean**2 / variance for each quadrature."""
    return 4 * stats.mean_X**2 / stats.var_X, 4 * stats.mean_Y**2 / stats.var_Y


def transfer_coefficients(in_stats: QuadratureStats, out_stats: QuadratureStats) -> tuple[float, float, float]:
    """(T_X, T_Y, T) with T_q = R_q^out / R_q^in."""
    rx_in, ry_in = signal_to_noise(in_stats)
    if rx_in == 0 or ry_in == 0:
        raise UndefinedMetricError("transfer coefficient undefined: an input quadrature has zero mean")
    rx_out, ry_out = signal_to_noise(out_stats)
    tx, ty = rx_out / rx_in, ry_out / ry_in
    return tx, ty, tx + ty


def linear_loss_curve(T):
    """Conditional variance of a lossy, noiseless memory: V = 1 - T/2."""
    T = np.asarray(T, dtype=float)
    if np.any((T < 0) | (T > 2)):
        raise ValueError("T must lie in [0, 2]")
    out = 1 - T / 2
    return float(out) if out.ndim == 0 else out


def classical_bound(T):
    """Best conditional variance reachable by measure-and-resend at transfer T < 1.

    With per-quadrature gain g, measuring both quadratures and re-preparing costs
    one vacuum unit each, giving T_q = g^2 / (1 + 2 g^2) and V_q = 1 + g^2, i.e.
    V = 1 + T / (2 - 2T).
    """
    T = np.asarray(T, dtype=float)
    if np.any((T < 0) | (T >= 1)):
        raise ValueError("classical memories reach only 0 <= T < 1")
    out = 1 + T / (2 - 2 * T)
    return float(out) if out.ndim == 0 else out


def classify(T: float, V: float, tolerance: float = 0.0) -> str:
    """'quantum', 'classical' or 'at-boundary' relative to the classical bound."""
    if T >= 1:
        return "quantum" if V < 1 - tolerance else "at-boundary" if V <= 1 + tolerance else "classical"
    bound = classical_bound(T)
    if V < bound - tolerance:
        return "quantum"
    if V > bound + tolerance:
        return "classical"
    return "at-boundary"


@dataclass
class TVMetrics:
    T_X: float
    T_Y: float
    T: float
    V_X: float
    V_Y: float
    V: float
    V_std_err: float
    region: str

    @property
    def V_classical(self) -> float | None:
        return classical_bound(self.T) if self.T < 1 else None

    @property
    def V_loss(self) -> float:
        return linear_loss_curve(min(self.T, 2.0))

    def row(self) -> dict:
        return {"T": self.T, "V": self.V, "V_classical": self.V_classical, "V_loss": self.V_loss, "region": self.region}


def tv_metrics(in_stats: QuadratureStats, out_stats: QuadratureStats, tolerance: float | None = None) -> TVMetrics:
    """T-V point from paired statistics.

    The default classification tolerance is the standard error of V for
    Gaussian samples, V / sqrt(count - 2).
    """
    tx, ty, t = transfer_coefficients(in_stats, out_stats)
    vx, vy, v = conditional_variances(in_stats, out_stats)
    se = v / math.sqrt(max(out_stats.count - 2, 1))
    region = classify(t, v, se if tolerance is None else tolerance)
    return TVMetrics(float(tx), float(ty), float(t), float(vx), float(vy), float(v), float(se), region)


TV_COLUMNS = ("T", "V", "V_classical", "V_loss", "region")


def write_tv_table(path, rows) -> None:
    """CSV with one T-V point per row, plottable as a T-V diagram."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.row() if isinstance(row, TVMetrics) else row)
