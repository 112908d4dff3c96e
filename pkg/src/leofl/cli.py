"""Command-line interface: run, sweep, windows, validate."""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys

from .config import ExperimentConfig, ValidationError, build_ground_station, build_planes_geometry, load_config
from .data import IngestionError
from .harness import export, export_sweep, run_experiment, run_sweep
from .orbital import visibility_windows

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INGESTION = 3


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for key in ("scheme", "q", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg.validate()


def _cmd_run(args) -> int:
    cfg = _load(args)
    def progress(n, metrics):
        if args.verbose:
            print(f"iter {n}: t={metrics.t_end_s:.1f} s  acc={metrics.accuracy:.4f}  "
                  f"bits={metrics.total_bits}")
    log = run_experiment(cfg, max_rounds=args.rounds, progress=progress)
    csv_path, manifest_path = export(log, cfg.output_dir, name=args.name)
    print(f"wrote {csv_path} and {manifest_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    kp_values = list(range(args.kp_min, args.kp_max + 1, args.kp_step))
    q_values = [float(x) for x in args.q_list.split(",")]
    rows = run_sweep(cfg, kp_values, q_values, iterations=args.iterations)
    path = export_sweep(rows, cfg.output_dir, name=args.name)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_windows(args) -> int:
    cfg = _load(args)
    gs = build_ground_station(cfg)
    plane = build_planes_geometry(cfg)[args.plane]
    horizon = args.hours * 3600.0
    for sat in range(plane.num_sats):
        for w in visibility_windows(plane, sat, gs, 0.0, horizon):
            print(f"plane {args.plane} sat {sat}: "
                  f"{w.start_s/3600:.3f} h -> {w.end_s/3600:.3f} h "
                  f"({w.end_s - w.start_s:.0f} s)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    _load(args)
    print("config OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leofl")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--scheme", choices=["DENSE_IA", "SIA", "CLSIA", "NO_ISL_DIRECT"])
        p.add_argument("--q", type=float, help="sparsification ratio in (0, 1]")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="run one experiment")
    common(p_run)
    p_run.add_argument("--rounds", type=int, help="override the number of global iterations")
    p_run.add_argument("--name", default="run", help="output file stem")
    p_run.add_argument("--verbose", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="data-volume sweep over ring sizes")
    common(p_sweep)
    p_sweep.add_argument("--kp-min", type=int, default=8)
    p_sweep.add_argument("--kp-max", type=int, default=28)
    p_sweep.add_argument("--kp-step", type=int, default=2)
    p_sweep.add_argument("--q-list", default="0.01,0.1", dest="q_list")
    p_sweep.add_argument("--iterations", type=int, default=11)
    p_sweep.add_argument("--name", default="sweep")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_win = sub.add_parser("windows", help="print visibility windows for debugging")
    common(p_win)
    p_win.add_argument("--plane", type=int, default=0)
    p_win.add_argument("--hours", type=float, default=24.0)
    p_win.set_defaults(func=_cmd_windows)

    p_val = sub.add_parser("validate", help="check a config file")
    common(p_val)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except IngestionError as exc:
        print(f"dataset ingestion failed: {exc}", file=sys.stderr)
        return EXIT_INGESTION


if __name__ == "__main__":
    sys.exit(main())
