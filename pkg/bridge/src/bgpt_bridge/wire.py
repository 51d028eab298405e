"""Predictor side of the carving host's stdio wire protocol.

Implemented independently of the host package so the two programs meet only at
the byte stream. Framing, all integers little-endian u32:

    host -> bridge   "CGP1"
    bridge -> host   "CGP1" + one version byte (0x01)
    host -> bridge   "RQ" + prefix length + requested length + prefix bytes
    bridge -> host   "RS" + payload length + payload bytes

The payload length always tells the truth: a model that cannot fill a request
declares what it actually produced and lets the host decide what a shortfall
means. Anything unparseable earns a single "ER" + length + ascii-reason frame
and a nonzero exit; a stream that simply closes between requests is a normal
shutdown.
"""
from __future__ import annotations

import struct
import sys
from typing import Callable

HANDSHAKE_MAGIC = b"CGP1"
PROTOCOL_VERSION = 1
REQUEST_MAGIC = b"RQ"
RESPONSE_MAGIC = b"RS"
ERROR_MAGIC = b"ER"

MAX_ERROR_MESSAGE = 4096
MAX_PREFIX_LENGTH = 1 << 26
MAX_REQUEST_LENGTH = 1 << 26

Generate = Callable[[bytes, int], bytes]


def encode_response(payload: bytes) -> bytes:
    return RESPONSE_MAGIC + struct.pack("<I", len(payload)) + payload


def encode_error(reason: str) -> bytes:
    text = reason.encode("ascii", "replace")[:MAX_ERROR_MESSAGE]
    return ERROR_MAGIC + struct.pack("<I", len(text)) + text


class _Truncated(Exception):
    """The stream ended mid-frame; `got` is how many bytes arrived."""

    def __init__(self, got: int):
        super().__init__(f"stream ended after {got} bytes of a frame")
        self.got = got


def serve(generate: Generate, stdin=None, stdout=None) -> int:
    """Answer requests until the host closes the stream; returns the exit status.

    `generate(prefix, requested_length)` may return fewer bytes than requested;
    the response frame declares whatever came back. An exception from the
    generator becomes an error frame rather than a wedged pipe.
    """
    stdin = sys.stdin.buffer if stdin is None else stdin
    stdout = sys.stdout.buffer if stdout is None else stdout

    def pull(n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            chunk = stdin.read(n - len(buf))
            if not chunk:
                raise _Truncated(len(buf))
            buf.extend(chunk)
        return bytes(buf)

    def push(data: bytes) -> bool:
        try:
            stdout.write(data)
            stdout.flush()
        except OSError:
            return False  # host is gone; the exit status still tells the story
        return True

    def bail(reason: str) -> int:
        push(encode_error(reason))
        return 2

    try:
        magic = pull(4)
    except _Truncated:
        return bail("stream closed before the handshake")
    if magic != HANDSHAKE_MAGIC:
        return bail(f"bad handshake magic {magic!r}")
    if not push(HANDSHAKE_MAGIC + bytes([PROTOCOL_VERSION])):
        return 2

    while True:
        try:
            head = pull(2)
        except _Truncated as cut:
            if cut.got == 0:
                return 0  # clean close between requests
            return bail("request frame cut off")
        if head != REQUEST_MAGIC:
            return bail(f"bad request magic {head!r}")
        try:
            prefix_len, requested = struct.unpack("<II", pull(8))
            if prefix_len > MAX_PREFIX_LENGTH:
                return bail(f"prefix length {prefix_len} out of range")
            if requested > MAX_REQUEST_LENGTH:
                return bail(f"requested length {requested} out of range")
            prefix = pull(prefix_len) if prefix_len else b""
        except _Truncated:
            return bail("request frame cut off")
        try:
            payload = generate(prefix, requested)
        except Exception as exc:  # the stream must outlive a broken model call
            return bail(f"generation failed: {exc}")
        if not push(encode_response(payload)):
            return 2
