"""Command-line entry point.

    shred simulate|sample|reconstruct|svd|train|eval|report
          --config <path> [--out <dir>] [--seed <u64>]

Exit codes: 0 success, 2 validation/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import NumericalError, ValidationError
from .config import load_config
from .runner import run_experiment

SUBCOMMANDS = ("simulate", "sample", "reconstruct", "svd", "train", "eval", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shred",
        description="Sensor-trajectory field reconstruction experiments",
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the pipeline through the {name} stage")
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = args.out or cfg.output_dir or "."
        report = run_experiment(cfg, out_dir, stage=args.stage)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for key in sorted(report.metrics):
        print(f"{key} = {report.metrics[key]:.6g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
