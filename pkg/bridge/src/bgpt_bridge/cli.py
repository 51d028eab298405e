"""Command-line entry point: flags in, wire protocol on stdio out.

Everything that can go wrong at startup (missing checkpoint, bad device, an
artifact that breaks the contract) is reported on stderr with a nonzero exit
before the handshake, so the host never sees a half-alive predictor.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .model import BridgeConfig, BridgeError, DECODING_MODES, load_model
from .wire import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bgpt-bridge",
        description="Serve a pre-trained byte-model checkpoint as a wire-protocol predictor.",
    )
    parser.add_argument("--checkpoint", required=True, type=Path,
                        help="TorchScript artifact to load")
    parser.add_argument("--device", default="cpu",
                        help="torch device selector (default cpu)")
    parser.add_argument("--mode", choices=DECODING_MODES, default="greedy",
                        help="decoding strategy (default greedy)")
    parser.add_argument("--temperature", type=float, default=1.0,
                        help="softmax temperature for sampling (default 1.0)")
    parser.add_argument("--top-k", type=int, default=None,
                        help="restrict sampling to the k best-scored bytes")
    parser.add_argument("--seed", type=int, default=0,
                        help="decoding seed for sampling (default 0)")
    parser.add_argument("--max-output", type=int, default=8192,
                        help="most bytes ever produced for one request (default 8192)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = BridgeConfig(
        checkpoint=args.checkpoint,
        device=args.device,
        mode=args.mode,
        temperature=args.temperature,
        top_k=args.top_k,
        seed=args.seed,
        max_output_bytes=args.max_output,
    )
    try:
        generator = load_model(config)
    except BridgeError as exc:
        print(f"bgpt-bridge: {exc}", file=sys.stderr)
        return 2
    return serve(generator.generate)


if __name__ == "__main__":
    raise SystemExit(main())
