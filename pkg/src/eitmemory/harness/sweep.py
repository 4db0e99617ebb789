"""Parameter sweeps over dotted configuration paths."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from ..errors import ConfigError
from .config import RunConfig
from .run import run_sequence


def sweep_configs(cfg: RunConfig, path: str, values) -> list[RunConfig]:
    """One config per value; every point keeps ``cfg.base_seed``."""
    values = list(values)
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"sweep values must be numeric, got {v!r}", path)
    return [cfg.with_value(path, v) for v in values]


def _point(args) -> dict:
    path, value, cfg = args
    return {"parameter": path, "value": value} | run_sequence(cfg).row()


def sweep(cfg: RunConfig, path: str, values, workers: int = 1) -> list[dict]:
    """Run one sequence per value of ``path``; returns summary rows in input order.

    Points are independent, so ``workers > 1`` distributes them over processes
    without changing any result.
    """
    values = list(values)
    jobs = [(path, v, c) for v, c in zip(values, sweep_configs(cfg, path, values))]
    if workers <= 1 or len(jobs) <= 1:
        return [_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point, jobs))
