"""Command-line entry point.

Subcommands: train, eval, predict, gradcheck. Exit codes:

    0  success
    2  configuration error (bad config file, invalid flags, shape plan)
    3  data error (missing/malformed dataset files, incompatible checkpoint)
    4  numeric failure (gradient check above tolerance, non-finite values)
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import RunConfig, load_config
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
    UsageError,
)
from .harness import run_eval, run_gradcheck, run_predict, run_train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unist", description="Unified saliency transformer, desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint_required=False):
        p.add_argument("--config", required=True, help="path to the key=value config file")
        p.add_argument("--out", default=None, help="output directory (overrides config out_dir)")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        if checkpoint_required is not None:
            p.add_argument("--checkpoint", required=checkpoint_required, help="checkpoint path")

    p_train = sub.add_parser("train", help="train on the configured dataset")
    common(p_train, checkpoint_required=None)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the configured dataset")
    common(p_eval, checkpoint_required=True)

    p_predict = sub.add_parser("predict", help="predict on one clip directory")
    common(p_predict, checkpoint_required=True)
    p_predict.add_argument("--clip", required=True, help="path to a clip directory (with frames/)")
    p_predict.add_argument("--dump-scores", action="store_true", help="also write attention-score grids")

    p_gc = sub.add_parser("gradcheck", help="finite-difference check of every block (64-bit)")
    common(p_gc, checkpoint_required=None)
    p_gc.add_argument("--max-coords", type=int, default=12, help="sampled coordinates per tensor")
    return parser


def _load(args) -> RunConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed).validate()
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load(args)
        if args.command == "train":
            summary = run_train(config)
            print(f"trained {summary['steps']} steps, final loss {summary['final_loss']:.6f}")
            print(f"checkpoint: {summary['checkpoint']}")
            print(f"loss log:   {summary['loss_csv']}")
        elif args.command == "eval":
            report = run_eval(config, args.checkpoint)
            for name, value in report.means().items():
                print(f"{name:12s} {value:.6f}")
        elif args.command == "predict":
            written = run_predict(config, args.checkpoint, args.clip, dump_scores=args.dump_scores)
            for path in written:
                print(path)
        elif args.command == "gradcheck":
            results = run_gradcheck(config, max_coords=args.max_coords, echo=print)
            failed = [r["block"] for r in results if not r["passed"]]
            if failed:
                print(f"FAILED blocks: {', '.join(failed)}", file=sys.stderr)
                return EXIT_NUMERIC
            print("all blocks passed")
    except (ConfigError, ShapeError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
