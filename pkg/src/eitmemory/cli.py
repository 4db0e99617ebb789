"""Command-line interface: ``eitmemory <command> ...``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .eit_medium import eit_fwhm
from .errors import ConfigError, NumericsError, SaturationError, UndefinedMetricError
from .harness.config import RunConfig
from .harness.outputs import emit_outputs, write_csv, write_json
from .harness.presets import PRESETS
from .harness.run import run_sequence
from .harness.sweep import sweep
from .homodyne import HomodyneRecord, centered_flat_profile, demodulate, flat_profile, load_records, matched_profile, save_records, window_profile
from .quadstats import QuadratureSamples, ensemble_stats, paired_stats, tv_metrics

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICS, EXIT_IO = 0, 2, 3, 4


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _values(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse values {text!r}", "--values") from None


def _load_config(args) -> RunConfig:
    if args.config:
        try:
            cfg = RunConfig.load(args.config)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})", str(args.config)) from None
    else:
        cfg = PRESETS[args.preset]()
    for item in args.set or []:
        path, sep, value = item.partition("=")
        if not sep:
            raise ConfigError("expected PATH=VALUE", item)
        cfg = cfg.with_value(path.strip(), _parse_value(value.strip()))
    if args.seed is not None:
        cfg = cfg.with_value("base_seed", args.seed)
    return cfg


def _records_from_rows(rows, cfg: RunConfig, stream: int) -> list[HomodyneRecord]:
    from .harness.run import record_seed

    det = cfg.detection
    full_scale = det.full_scale * (2 if det.subtract and stream == 1 else 1)
    sigma = math.sqrt(2) if det.subtract and stream == 1 else 1.0
    return [
        HomodyneRecord(row, det.sample_rate, det.adc_bits, full_scale, record_seed(cfg.base_seed, k, stream), sigma)
        for k, row in enumerate(rows)
    ]


def cmd_run(args) -> int:
    cfg = _load_config(args)
    result = run_sequence(cfg, keep_samples=args.save_records is not None)
    if args.out:
        emit_outputs(result, args.out, cfg)
    if args.save_records:
        base = Path(args.save_records)
        base.mkdir(parents=True, exist_ok=True)
        save_records(base / "input.ehr", _records_from_rows(result.samples["input_records"], cfg, 0))
        save_records(base / "output.ehr", _records_from_rows(result.samples["output_records"], cfg, 1))
    json.dump(_brief(result.row()), sys.stdout, indent=2)
    print()
    return EXIT_OK


def _brief(row: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items()}


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rows = sweep(cfg, args.param, _values(args.values), workers=args.workers)
    if args.out:
        emit_outputs(rows, args.out, cfg)
    for row in rows:
        print(json.dumps(_brief(row)))
    return EXIT_OK


def cmd_tv(args) -> int:
    args.param = args.param or "control.power"
    return cmd_sweep(args)


def cmd_eit_width(args) -> int:
    cfg = _load_config(args)
    params = cfg.resolved_ensemble()
    rows = []
    for p in _values(args.powers):
        rabi = cfg.control.rabi_calibration * math.sqrt(p)
        rows.append({"power_mW": p, "rabi": rabi, "fwhm_Hz": eit_fwhm(params, rabi) / (2 * math.pi)})
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_csv(args.out, rows, ("power_mW", "rabi", "fwhm_Hz"))
    for row in rows:
        print(f"{row['power_mW']:10.4g} mW  {row['fwhm_Hz'] / 1e6:.4f} MHz")
    return EXIT_OK


def _profile_for(args, record: HomodyneRecord, omega: float):
    fs = record.sample_rate
    if args.profile == "matched":
        macro = load_records(args.macroscopic)[0]
        return matched_profile(macro, omega, window=tuple(args.window) if args.window else None)
    if args.profile == "window":
        if not args.window:
            raise ConfigError("window profile needs --window START STOP", "--window")
        return window_profile(args.window[0], args.window[1] - args.window[0], fs)
    if args.center is not None:
        return centered_flat_profile(omega, fs, args.n_periods, args.center)
    start = args.window[0] if args.window else record.t0
    return flat_profile(omega, fs, args.n_periods, start)


def _quadratures(records, args, omega, stage):
    prof = _profile_for(args, records[0], omega)
    xy = np.array([demodulate(r, omega, prof) for r in records])
    scale = 1.0 / records[0].shot_sigma
    return QuadratureSamples(xy[:, 0] * scale, xy[:, 1] * scale, stage, np.arange(len(records)))


def cmd_analyze(args) -> int:
    omega = 2 * math.pi * args.frequency
    out = _quadratures(load_records(args.records), args, omega, "retrieved")
    summary = {"output": ensemble_stats(out).__dict__}
    if args.input_records:
        saved = args.window, args.center
        args.window, args.center = args.input_window, args.input_center
        inp = _quadratures(load_records(args.input_records), args, omega, "input")
        args.window, args.center = saved
        s_in, s_out = paired_stats(inp, out)
        summary = {"input": s_in.__dict__, "output": s_out.__dict__}
        try:
            summary["tv"] = tv_metrics(s_in, s_out).__dict__
        except UndefinedMetricError as exc:
            summary["tv"] = {"error": str(exc)}
    if args.out:
        write_json(args.out, summary)
    print(json.dumps(summary, indent=2, default=float))
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = PRESETS[args.preset]()
    if args.print_defaults:
        print(cfg.to_json())
    if args.out:
        cfg.save(args.out)
    return EXIT_OK


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS), default="default", help="starting configuration when --config is absent")
    p.add_argument("--set", action="append", metavar="PATH=VALUE", help="override a field, e.g. control.power=40 (repeatable)")
    p.add_argument("--seed", type=int, help="override base_seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eitmemory", description="EIT sideband memory simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one sequence")
    _config_args(p)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--save-records", type=Path, metavar="DIR", help="also write input/output homodyne records")
    p.set_defaults(func=cmd_run)

    for name, func, helptext in (("sweep", cmd_sweep, "sweep one numeric config field"), ("tv", cmd_tv, "T-V diagram sweep (control power by default)")):
        p = sub.add_parser(name, help=helptext)
        _config_args(p)
        p.add_argument("--param", required=name == "sweep", help="dotted config path, e.g. timing.storage")
        p.add_argument("--values", required=True, help="a,b,c or start:stop:count")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", type=Path)
        p.set_defaults(func=func)

    p = sub.add_parser("eit-width", help="EIT window FWHM versus control power")
    _config_args(p)
    p.add_argument("--powers", default="5,10,20,40,80,140", help="control powers in mW")
    p.add_argument("--out", type=Path, help="CSV file")
    p.set_defaults(func=cmd_eit_width)

    p = sub.add_parser("analyze", help="demodulate saved homodyne records")
    p.add_argument("records", type=Path)
    p.add_argument("--frequency", type=float, default=1.25e6, help="sideband frequency in Hz")
    p.add_argument("--profile", choices=("flat", "window", "matched"), default="flat")
    p.add_argument("--n-periods", type=int, choices=(2, 3, 4), default=2)
    p.add_argument("--window", type=float, nargs=2, metavar=("START", "STOP"))
    p.add_argument("--center", type=float, help="center time of a flat profile")
    p.add_argument("--macroscopic", type=Path, help="record file for the matched profile")
    p.add_argument("--input-records", type=Path, help="paired input records for T-V metrics")
    p.add_argument("--input-window", type=float, nargs=2, metavar=("START", "STOP"))
    p.add_argument("--input-center", type=float)
    p.add_argument("--out", type=Path, help="JSON summary file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("config", help="show or write configurations")
    p.add_argument("--print-defaults", action="store_true")
    p.add_argument("--preset", choices=sorted(PRESETS), default="default")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, SaturationError, UndefinedMetricError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numerics error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
