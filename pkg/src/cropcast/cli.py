"""Command-line entry point: one subcommand per pipeline stage.

``run`` executes every stage in order; single-stage subcommands recompute
just their stage, filling in any missing prerequisites first, so running
the stages one by one reproduces a full run byte for byte.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config, validate_config
from .errors import CropcastError
from .pipeline import STAGES, run_pipeline, run_stage


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", default="pipeline.toml", help="TOML pipeline configuration (default: %(default)s)"
    )
    common.add_argument("--seed", type=int, default=None, help="override the root seed")
    common.add_argument("--out", default=None, help="override the output directory")
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (accepted for forward compatibility; stages run sequentially)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="cropcast",
        description="Pixel-level crop production forecasting from multi-resolution rasters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", parents=[common], help="execute every stage in order")
    sub.add_parser("validate", parents=[common], help="check the config; print one line per problem")
    stage_help = {
        "synth": "generate the synthetic scene described by [scene]",
        "select-crops": "regional staple selection from the commodity balances",
        "mask": "crop mask from the baseline production raster",
        "forecast-features": "align stacks and forecast the unobserved season tail",
        "features": "season-window feature vectors for both years",
        "train": "fit the production model on the baseline year",
        "predict": "predict target-year production per pixel",
        "report": "country totals, ratio map, and the artifact manifest",
    }
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=stage_help[stage])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        problems = validate_config(args.config)
        for line in problems:
            print(line, file=sys.stderr)
        return 1 if problems else 0

    if args.command == "run":
        return run_pipeline(args.config, seed=args.seed, out_dir=args.out, threads=args.threads)

    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out, threads=args.threads)
    except CropcastError as e:
        print(f"[config] {e}", file=sys.stderr)
        return 1
    return run_stage(cfg, args.command)


if __name__ == "__main__":
    sys.exit(main())
