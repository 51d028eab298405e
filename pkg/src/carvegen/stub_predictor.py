"""Conformance-only predictor double: answers every request with one repeated byte.

Run as `python -m carvegen.stub_predictor`. Useful for exercising the wire protocol
and the host pipeline without any model at all; `--limit` imitates a predictor with
a fixed output ceiling (responses truncate honestly).
"""
from __future__ import annotations

import argparse

from .protocol import serve_stdio


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fill", type=lambda s: int(s, 0), default=0x41,
                        help="byte value to repeat (default 0x41)")
    parser.add_argument("--limit", type=int, default=None,
                        help="cap on bytes produced per request")
    args = parser.parse_args(argv)
    if not 0 <= args.fill <= 255:
        parser.error("--fill must be a byte value")

    def generate(prefix: bytes, requested: int) -> bytes:
        n = requested if args.limit is None else min(requested, args.limit)
        return bytes([args.fill]) * n

    return serve_stdio(generate)


if __name__ == "__main__":
    raise SystemExit(main())
