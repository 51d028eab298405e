#!/usr/bin/env python3
"""Drive the whole pipeline on a freshly generated synthetic corpus.

Writes a corpus of banded-gradient bitmaps and a handful of decoy sources
under the chosen directory, emits a run configuration for them, then runs
prepare, train, predict, analyze, match, and report in order. The analyze
phase also emits a local-similarity heatmap and the five reconstruction
panels for the first record of each ratio set, mirroring the figures a real
investigation would pull.

    python3 scripts/run_experiment.py /tmp/demo --count 60 --per-ratio 20
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from carvegen import cli, synthetic
from carvegen.fragments import load_manifest, ratio_tag


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", type=Path, help="working directory for everything")
    parser.add_argument("--count", type=int, default=60,
                        help="synthetic corpus size (default 60)")
    parser.add_argument("--per-ratio", type=int, default=20,
                        help="records sliced per ratio set (default 20)")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--order", type=int, default=3,
                        help="context length of the byte model")
    parser.add_argument("--pool-size", type=int, default=100)
    parser.add_argument("--sample", type=int, default=10,
                        help="records matched per ratio set")
    parser.add_argument("--jobs", type=int, default=2)
    args = parser.parse_args(argv)

    if args.count < 3 * args.per_ratio:
        parser.error(f"--count must be at least 3 * per-ratio = {3 * args.per_ratio}")
    if args.sample > args.per_ratio:
        parser.error("--sample cannot exceed --per-ratio")

    out = args.out
    print(f"generating {args.count} images and decoy sources under {out}")
    synthetic.write_corpus(out / "corpus", args.count, args.seed)
    decoys = synthetic.write_decoy_sources(out / "decoys", args.seed)

    config_path = out / "run.json"
    config_path.write_text(json.dumps({
        "corpus_dir": "corpus",
        "output_dir": "run",
        "per_ratio_count": args.per_ratio,
        "seed": args.seed,
        "jobs": args.jobs,
        "sample_per_ratio": args.sample,
        "predictor": {"kind": "builtin", "order": args.order},
        "pool": {
            "size": args.pool_size,
            "decoy_sources": [str(path.relative_to(out)) for _, path in decoys],
        },
    }, indent=2) + "\n")

    def phase(*argv_tail: str) -> None:
        rc = cli.main(["--config", str(config_path), *argv_tail])
        if rc != 0:
            raise SystemExit(rc)

    phase("prepare")
    phase("train")
    phase("predict")

    manifest = load_manifest(out / "run" / "dataset")
    showcase = []
    for ratio in sorted(manifest.ratios):
        first = min(manifest.entries_for(ratio), key=lambda e: e.source_id)
        showcase += ["--heatmap", f"{ratio_tag(ratio)}/{first.source_id}",
                     "--reconstruct", f"{ratio_tag(ratio)}/{first.source_id}"]
    phase("analyze", *showcase)
    phase("match")
    phase("report")

    print()
    print((out / "run" / "analysis" / "summary.txt").read_text())
    print("tally:", (out / "run" / "match" / "tally.txt").read_text().strip())
    print("full report:", out / "run" / "report" / "report.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
