"""Writers for run and sweep outputs (JSON and RFC-4180 CSV)."""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from ..quadstats import TV_COLUMNS, classical_bound, classify, linear_loss_curve
from .config import RunConfig
from .run import RunResult

SWEEP_COLUMNS = (
    "parameter",
    "value",
    "efficiency",
    "efficiency_vs_input",
    "efficiency_vs_transmitted",
    "retrieved_phase",
    "T",
    "V",
    "V_classical",
    "V_loss",
    "region",
    "retrieved_noise_ratio",
    "field_H",
    "delta",
)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)


def write_csv(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})


def tv_rows(rows) -> list[dict]:
    """T-V diagram rows with boundary columns recomputed from T."""
    out = []
    for row in rows:
        T, V = row.get("T"), row.get("V")
        if T is None or V is None:
            continue
        v_cl = classical_bound(T) if T < 1 else None
        out.append({"T": T, "V": V, "V_classical": v_cl, "V_loss": float(linear_loss_curve(min(T, 2.0))), "region": row.get("region") or classify(T, V)})
    return out


def emit_outputs(result, out_dir, config: RunConfig | None = None) -> list[Path]:
    """Write a single run (``RunResult``) or a sweep table (list of rows) to ``out_dir``.

    Returns the written paths.  File-system failures propagate as ``OSError``
    with the offending path in the message.
    """
    out = Path(out_dir)
    written = []
    try:
        os.makedirs(out, exist_ok=True)
        if config is not None:
            written.append(out / "config.json")
            config.save(written[-1])
        if isinstance(result, RunResult):
            written.append(out / "summary.json")
            write_json(written[-1], result.summary())
            if result.traces:
                cols = list(result.traces)
                n = len(result.traces["time"])
                rows = [{c: float(result.traces[c][i]) for c in cols} for i in range(n)]
                written.append(out / "traces.csv")
                write_csv(written[-1], rows, cols)
            written.append(out / "tv_diagram.csv")
            write_csv(written[-1], tv_rows([result.row()]), TV_COLUMNS)
        else:
            rows = list(result)
            written.append(out / "sweep.csv")
            write_csv(written[-1], rows, SWEEP_COLUMNS)
            written.append(out / "tv_diagram.csv")
            write_csv(written[-1], tv_rows(rows), TV_COLUMNS)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write outputs: {exc.strerror}", exc.filename or str(out)) from exc
    return written
