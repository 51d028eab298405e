"""Protocol conformance checks for predictor processes.

Any predictor speaking the stdio protocol can be checked with `run_conformance`; the
same suite gates the shipped stub and any external adapter. Failures raise
AssertionError with a message naming the broken guarantee.
"""
from __future__ import annotations

import struct
import subprocess
import time

from .errors import ShortResponseError
from .protocol import (
    ERROR_MAGIC,
    HANDSHAKE_MAGIC,
    REQUEST_MAGIC,
    ExternalPredictor,
)

DEFAULT_CASES = (
    (b"", 1),
    (b"\x00", 16),
    (bytes(range(256)), 300),
    (b"prefix bytes " * 40, 64),
)

MALFORMED_FRAMES = (
    b"XX\x00\x00\x00\x00\x00\x00\x00\x00",            # wrong request magic
    REQUEST_MAGIC + b"\x04\x00",                        # truncated length fields
    REQUEST_MAGIC + struct.pack("<II", 2**31, 4),       # absurd prefix length
    REQUEST_MAGIC + struct.pack("<II", 4, 2**31),       # absurd request length
    b"\xff" * 32,                                       # noise
)


def check_handshake(command: list[str], *, timeout: float = 15.0) -> None:
    with ExternalPredictor(command, timeout=timeout):
        pass  # start() already validates magic and version


def check_generation(command: list[str], *, cases=DEFAULT_CASES, timeout: float = 30.0) -> None:
    with ExternalPredictor(command, timeout=timeout) as pred:
        for prefix, length in cases:
            payload = pred.request(prefix, length)
            assert len(payload) == length, (
                f"request for {length} bytes answered with {len(payload)}"
            )


def check_determinism(command: list[str], *, prefix: bytes = bytes(range(64)),
                      length: int = 128, timeout: float = 30.0) -> None:
    """Two fresh processes must answer the same request identically."""
    outputs = []
    for _ in range(2):
        with ExternalPredictor(command, timeout=timeout) as pred:
            outputs.append(pred.request(prefix, length))
    assert outputs[0] == outputs[1], "same request, different payloads across runs"


def check_output_limit(command: list[str], limit: int, *, timeout: float = 30.0) -> None:
    """A request beyond the predictor's ceiling must yield an honest short response."""
    with ExternalPredictor(command, timeout=timeout) as pred:
        assert len(pred.request(b"", limit)) == limit
        try:
            pred.request(b"", limit + 1)
        except ShortResponseError as exc:
            assert exc.received == limit, (
                f"short response reported {exc.received}, ceiling is {limit}"
            )
        else:
            raise AssertionError("request beyond the output ceiling was not truncated")


def check_malformed_request_handling(command: list[str], *, timeout: float = 15.0) -> None:
    """Garbage after the handshake must end the conversation, never wedge it."""
    for frame in MALFORMED_FRAMES:
        proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
        )
        try:
            proc.stdin.write(HANDSHAKE_MAGIC)
            proc.stdin.flush()
            reply = proc.stdout.read(5)
            assert reply[:4] == HANDSHAKE_MAGIC, f"handshake reply {reply!r}"
            proc.stdin.write(frame)
            proc.stdin.flush()
            proc.stdin.close()
            deadline = time.monotonic() + timeout
            while proc.poll() is None:
                assert time.monotonic() < deadline, (
                    f"predictor still running {timeout}s after malformed frame {frame!r}"
                )
                time.sleep(0.01)
            tail = proc.stdout.read()
            if tail:
                assert tail[:2] in (ERROR_MAGIC,), (
                    f"expected an error frame or silence after {frame!r}, got {tail[:8]!r}"
                )
        finally:
            if proc.poll() is None:
                proc.kill()
            proc.wait()


def check_rejects_bad_handshake(command: list[str], *, timeout: float = 15.0) -> None:
    proc = subprocess.Popen(
        command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL
    )
    try:
        proc.stdin.write(b"NOPE")
        proc.stdin.flush()
        proc.stdin.close()
        deadline = time.monotonic() + timeout
        while proc.poll() is None:
            assert time.monotonic() < deadline, "predictor accepted a bad handshake"
            time.sleep(0.01)
        assert proc.returncode != 0, "predictor exited 0 after a bad handshake"
    finally:
        if proc.poll() is None:
            proc.kill()
        proc.wait()


def run_conformance(command: list[str], *, output_limit: int | None = None,
                    timeout: float = 30.0) -> None:
    """The full gate: handshake, generation, determinism, malformed-input safety."""
    cases = DEFAULT_CASES
    if output_limit is not None:
        cases = tuple((prefix, min(length, output_limit)) for prefix, length in cases)
    check_handshake(command, timeout=timeout)
    check_generation(command, cases=cases, timeout=timeout)
    check_determinism(command, length=min(128, output_limit or 128), timeout=timeout)
    check_rejects_bad_handshake(command, timeout=timeout)
    check_malformed_request_handling(command, timeout=timeout)
    if output_limit is not None:
        check_output_limit(command, output_limit, timeout=timeout)
