"""Binary stdio protocol between the host and an external predictor process.

All integers are little-endian u32. The host opens the conversation:

    host -> predictor   "CGP1"
    predictor -> host   "CGP1" + one version byte (0x01)
    host -> predictor   "RQ" + prefix_length + requested_length + prefix bytes
    predictor -> host   "RS" + payload_length + payload bytes

A response's payload_length must equal the requested length; less is a short
response (the predictor hit its own output limit), more is a protocol violation.
A predictor that cannot continue may send "ER" + length + an ASCII reason and exit.

Host-side reads all run against a deadline so a wedged peer can never hang the
pipeline; the frame parser itself is pure and is fuzzed directly in the tests.
"""
from __future__ import annotations

import io
import os
import select
import struct
import subprocess
import time
from typing import Callable

from .errors import (
    PredictorCrashedError,
    PredictorTimeoutError,
    ProtocolError,
    ShortResponseError,
)

HANDSHAKE_MAGIC = b"CGP1"
PROTOCOL_VERSION = 1
REQUEST_MAGIC = b"RQ"
RESPONSE_MAGIC = b"RS"
ERROR_MAGIC = b"ER"

# sanity bounds; frames beyond these are hostile or corrupt, not big
MAX_ERROR_MESSAGE = 4096
MAX_PREFIX_LENGTH = 1 << 26
MAX_REQUEST_LENGTH = 1 << 26

ReadExact = Callable[[int], bytes]


def encode_request(prefix: bytes, requested_length: int) -> bytes:
    if requested_length < 0:
        raise ValueError("requested_length must be >= 0")
    return REQUEST_MAGIC + struct.pack("<II", len(prefix), requested_length) + prefix


def encode_response(payload: bytes) -> bytes:
    return RESPONSE_MAGIC + struct.pack("<I", len(payload)) + payload


def encode_error(message: str) -> bytes:
    data = message.encode("ascii", "replace")[:MAX_ERROR_MESSAGE]
    return ERROR_MAGIC + struct.pack("<I", len(data)) + data


def read_response(read_exact: ReadExact, requested_length: int) -> bytes:
    """Parse one response frame; raises on anything that is not a well-formed answer."""
    head = read_exact(6)
    magic = head[:2]
    (declared,) = struct.unpack("<I", head[2:6])
    if magic == ERROR_MAGIC:
        if declared > MAX_ERROR_MESSAGE:
            raise ProtocolError(f"error frame declares {declared} bytes, limit {MAX_ERROR_MESSAGE}")
        message = read_exact(declared).decode("ascii", "replace")
        raise ProtocolError(f"predictor reported an error: {message}")
    if magic != RESPONSE_MAGIC:
        raise ProtocolError(f"expected response magic, got {magic!r}")
    if declared > requested_length:
        raise ProtocolError(f"response declares {declared} bytes for a {requested_length}-byte request")
    payload = read_exact(declared)
    if declared < requested_length:
        raise ShortResponseError(
            f"predictor produced {declared} of {requested_length} requested bytes",
            requested=requested_length,
            received=declared,
        )
    return payload


def read_handshake_reply(read_exact: ReadExact) -> None:
    reply = read_exact(5)
    if reply[:4] != HANDSHAKE_MAGIC:
        raise ProtocolError(f"bad handshake magic {reply[:4]!r}")
    if reply[4] != PROTOCOL_VERSION:
        raise ProtocolError(f"peer speaks protocol version {reply[4]}, need {PROTOCOL_VERSION}")


def bytes_reader(data: bytes) -> ReadExact:
    """read_exact over an in-memory buffer; truncation surfaces as ProtocolError."""
    stream = io.BytesIO(data)

    def read_exact(n: int) -> bytes:
        chunk = stream.read(n)
        if len(chunk) != n:
            raise ProtocolError(f"stream ended {n - len(chunk)} bytes short")
        return chunk

    return read_exact


class ExternalPredictor:
    """A predictor subprocess driven over its stdin/stdout.

    One outstanding request at a time; every read honors `timeout` seconds, after
    which the process is killed and the request raises.
    """

    def __init__(self, command: list[str], *, timeout: float = 30.0, stderr=subprocess.DEVNULL):
        self.command = list(command)
        self.timeout = timeout
        self._stderr = stderr
        self._proc: subprocess.Popen | None = None
        self._buffer = bytearray()

    def __enter__(self) -> "ExternalPredictor":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    @property
    def endpoint_id(self) -> str:
        return " ".join(self.command)

    def start(self) -> None:
        if self._proc is not None:
            raise RuntimeError("predictor already started")
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=self._stderr,
            )
        except OSError as exc:
            raise PredictorCrashedError(f"could not launch {self.command!r}: {exc}") from exc
        deadline = time.monotonic() + self.timeout
        self._write(HANDSHAKE_MAGIC)
        read_handshake_reply(lambda n: self._read_exact(n, deadline))

    def request(self, prefix: bytes, requested_length: int) -> bytes:
        if self._proc is None:
            raise RuntimeError("predictor not started")
        deadline = time.monotonic() + self.timeout
        self._write(encode_request(prefix, requested_length))
        return read_response(lambda n: self._read_exact(n, deadline), requested_length)

    def close(self) -> None:
        proc = self._proc
        self._proc = None
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=2.0)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    def _write(self, data: bytes) -> None:
        proc = self._proc
        try:
            proc.stdin.write(data)
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PredictorCrashedError(f"predictor stopped reading: {exc}") from exc

    def _read_exact(self, n: int, deadline: float) -> bytes:
        proc = self._proc
        fd = proc.stdout.fileno()
        while len(self._buffer) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                proc.kill()
                raise PredictorTimeoutError(
                    f"predictor sent no data for {self.timeout:.1f}s"
                )
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.25))
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if chunk == b"":
                if proc.poll() is not None:
                    raise PredictorCrashedError(
                        f"predictor exited with status {proc.returncode} mid-conversation"
                    )
                raise ProtocolError("predictor closed its output stream")
            self._buffer += chunk
        out = bytes(self._buffer[:n])
        del self._buffer[:n]
        return out


def serve_stdio(generate: Callable[[bytes, int], bytes], stdin=None, stdout=None) -> int:
    """Run a predictor's side of the protocol over binary streams; returns exit status.

    `generate(prefix, requested_length)` may return fewer bytes than requested (its
    own output ceiling); the frame always declares the truth. A malformed incoming
    frame gets an error frame in reply and a nonzero exit.
    """
    import sys

    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer

    def read_exact(n: int) -> bytes | None:
        buf = bytearray()
        while len(buf) < n:
            chunk = stdin.read(n - len(buf))
            if not chunk:
                return None
            buf += chunk
        return bytes(buf)

    def fail(reason: str) -> int:
        try:
            stdout.write(encode_error(reason))
            stdout.flush()
        except OSError:
            pass
        return 2

    magic = read_exact(4)
    if magic != HANDSHAKE_MAGIC:
        return fail(f"bad handshake {magic!r}")
    stdout.write(HANDSHAKE_MAGIC + bytes([PROTOCOL_VERSION]))
    stdout.flush()

    while True:
        head = read_exact(2)
        if head is None:
            return 0  # peer closed the stream; normal shutdown
        if head != REQUEST_MAGIC:
            return fail(f"bad request magic {head!r}")
        lengths = read_exact(8)
        if lengths is None:
            return fail("request frame truncated")
        prefix_len, requested = struct.unpack("<II", lengths)
        if prefix_len > MAX_PREFIX_LENGTH or requested > MAX_REQUEST_LENGTH:
            return fail(f"request sizes out of bounds ({prefix_len}, {requested})")
        prefix = read_exact(prefix_len) if prefix_len else b""
        if prefix is None:
            return fail("request prefix truncated")
        try:
            payload = generate(prefix, requested)
        except Exception as exc:  # a broken generator must not wedge the stream
            return fail(f"generator failed: {exc}")
        stdout.write(encode_response(payload))
        stdout.flush()
