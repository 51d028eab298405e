#!/usr/bin/env python3
"""Gate an external predictor process against the wire-protocol contract.

Pass the predictor's argv after `--`; with no command the bundled stub is
checked, which doubles as a self-test of the harness.

    python3 scripts/conformance_check.py
    python3 scripts/conformance_check.py --output-limit 8192 -- my-predictor --flag
"""
from __future__ import annotations

import argparse
import sys

from carvegen.conformance import run_conformance
from carvegen.errors import ProtocolError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("command", nargs="*",
                        help="predictor argv (default: the bundled stub)")
    parser.add_argument("--output-limit", type=int, default=None,
                        help="declared ceiling on bytes per response, if any")
    parser.add_argument("--timeout", type=float, default=30.0)
    args = parser.parse_args(argv)

    command = args.command or [sys.executable, "-m", "carvegen.stub_predictor"]
    print("checking:", " ".join(command))
    try:
        run_conformance(command, output_limit=args.output_limit,
                        timeout=args.timeout)
    except (ProtocolError, AssertionError, OSError) as exc:
        print(f"FAIL: {exc}")
        return 1
    print("PASS: handshake, generation, determinism, malformed-input safety")
    return 0


if __name__ == "__main__":
    sys.exit(main())
