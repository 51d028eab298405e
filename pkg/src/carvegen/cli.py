"""Command-line entry point.

Subcommands map one-to-one onto pipeline phases:

    carvegen prepare  --config run.json        slice the corpus into fragments
    carvegen train    --config run.json        fit the builtin byte model
    carvegen predict  --config run.json        generate continuations
    carvegen analyze  --config run.json        similarity metrics and summaries
    carvegen match    --config run.json        rank candidate pools
    carvegen report   --config run.json        assemble the text report

Global flags --seed, --jobs, and --out override the config file. Exit code 0
means success, 1 means some records failed but the run completed, 2 means the
configuration or an input was unusable.
"""
from __future__ import annotations

import argparse
import logging
import sys

from dataclasses import replace

from . import pipeline
from .config import apply_overrides, load_config
from .errors import CarvingError, ConfigError

log = logging.getLogger("carvegen")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carvegen",
        description="generative multimedia carving pipeline",
    )
    parser.add_argument("--config", required=True, help="run configuration JSON")
    parser.add_argument("--seed", type=int, default=None, help="override root seed")
    parser.add_argument("--jobs", type=int, default=None, help="override worker count")
    parser.add_argument("--out", default=None, help="override output directory")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", help="build the sliced fragment dataset")
    sub.add_parser("train", help="train the builtin predictor")
    sub.add_parser("predict", help="generate predicted continuations")

    analyze = sub.add_parser("analyze", help="compute similarity metrics")
    analyze.add_argument(
        "--heatmap",
        action="append",
        default=[],
        metavar="ID",
        help="emit a local-similarity heatmap for a record (set/source_id)",
    )
    analyze.add_argument(
        "--reconstruct",
        action="append",
        default=[],
        metavar="ID",
        help="emit the five reconstruction panels for a record",
    )

    match = sub.add_parser("match", help="rank candidate pools")
    match.add_argument(
        "--sample",
        type=int,
        default=None,
        metavar="N",
        help="records sampled per ratio set",
    )
    match.add_argument(
        "--perfect",
        action="store_true",
        help="diagnostic: substitute true fragments for predictions",
    )

    sub.add_parser("report", help="assemble the run report")
    return parser


def _setup_logging(paths: pipeline.RunPaths) -> None:
    log.setLevel(logging.INFO)
    log.handlers.clear()
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(console)
    try:
        paths.root.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(paths.log_file)
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(message)s")
        )
        log.addHandler(file_handler)
    except OSError:
        pass  # an unwritable log file must not block the run itself


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config = apply_overrides(
            config, seed=args.seed, jobs=args.jobs, output_dir=args.out
        )
        if args.command == "match" and args.sample is not None:
            config = replace(config, sample_per_ratio=args.sample)
        config.check_paths()
    except CarvingError as exc:
        print(f"carvegen: {exc}", file=sys.stderr)
        return 2

    _setup_logging(pipeline.paths_for(config))

    try:
        if args.command == "prepare":
            pipeline.cmd_prepare(config)
            return 0
        if args.command == "train":
            pipeline.cmd_train(config)
            return 0
        if args.command == "predict":
            outcome = pipeline.cmd_predict(config)
        elif args.command == "analyze":
            outcome = pipeline.cmd_analyze(
                config,
                heatmap_ids=tuple(args.heatmap),
                reconstruct_ids=tuple(args.reconstruct),
            )
        elif args.command == "match":
            outcome = pipeline.cmd_match(config, perfect=args.perfect)
        else:
            pipeline.cmd_report(config)
            return 0
    except ConfigError as exc:
        log.error("configuration problem: %s", exc)
        return 2
    except CarvingError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2
    except OSError as exc:
        log.error("io failure: %s", exc)
        return 2

    for problem in outcome.problems:
        log.warning("%s", problem)
    return 0 if outcome.ok else 1


if __name__ == "__main__":
    sys.exit(main())
