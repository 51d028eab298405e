"""Byte-level sequence prediction.

The built-in model is an order-k context model over bytes: counts of every
(context, next byte) pair for all context lengths 0..k, additive smoothing within a
context, and longest-match backoff across context lengths (an unseen context defers
to the next shorter one; order 0 always answers). It exists so the pipeline runs
end to end without any external model process, and as the fixed reference that
experiments can be reproduced against.

Continuation is strictly autoregressive: each emitted byte becomes context for the
next. Greedy decoding is deterministic; the sampling policies draw from the
toolkit's own generator, seeded from the policy, so runs are replayable.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import CorruptModelError, EmptyCorpusError, VersionMismatchError
from .rng import Rng

MODEL_MAGIC = b"OKBM"
MODEL_FORMAT_VERSION = 1

MODE_GREEDY = "greedy"
MODE_TEMPERATURE = "temperature"
MODE_TOP_K = "top_k"
_MODES = (MODE_GREEDY, MODE_TEMPERATURE, MODE_TOP_K)

VOCAB = 256


@dataclass(frozen=True)
class SamplingPolicy:
    mode: str = MODE_GREEDY
    temperature: float = 1.0
    top_k: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.mode == MODE_TEMPERATURE and not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.mode == MODE_TOP_K and self.top_k < 1:
            raise ValueError("top_k must be at least 1")

    def describe(self) -> dict:
        out = {"mode": self.mode}
        if self.mode == MODE_TEMPERATURE:
            out["temperature"] = self.temperature
            out["seed"] = self.seed
        elif self.mode == MODE_TOP_K:
            out["top_k"] = self.top_k
            out["seed"] = self.seed
        return out


GREEDY = SamplingPolicy()


class ByteModel:
    """Counts for contexts of length 0..order; see the module docstring."""

    def __init__(self, order: int, smoothing: float,
                 tables: list[dict[bytes, dict[int, int]]], training_digest: str):
        if order < 0:
            raise ValueError("order must be >= 0")
        if not smoothing > 0:
            raise ValueError("smoothing must be positive so every byte keeps mass")
        if len(tables) != order + 1:
            raise ValueError("need one table per context length 0..order")
        if not tables[0].get(b""):
            raise EmptyCorpusError("model has no order-0 counts")
        self.order = order
        self.smoothing = smoothing
        self.tables = tables
        self.training_digest = training_digest

    @property
    def predictor_id(self) -> str:
        return f"ctx{self.order}-{self.training_digest[:12]}"

    def lookup(self, context: bytes) -> tuple[int, dict[int, int]]:
        """Longest trained context that suffixes `context`; returns (length, counts)."""
        limit = min(self.order, len(context))
        for j in range(limit, -1, -1):
            counts = self.tables[j].get(context[len(context) - j :])
            if counts:
                return j, counts
        raise EmptyCorpusError("no counts at any context length")  # unreachable once trained

    def distribution(self, context: bytes) -> np.ndarray:
        """Smoothed next-byte probabilities; always a proper distribution."""
        _, counts = self.lookup(context)
        total = sum(counts.values())
        probs = np.full(VOCAB, self.smoothing, dtype=np.float64)
        for byte, count in counts.items():
            probs[byte] += count
        probs /= total + self.smoothing * VOCAB
        return probs

    def __eq__(self, other):
        if not isinstance(other, ByteModel):
            return NotImplemented
        return (self.order == other.order and self.smoothing == other.smoothing
                and self.training_digest == other.training_digest
                and self.tables == other.tables)


def corpus_digest(corpus: Iterable[bytes]) -> str:
    h = hashlib.sha256()
    for item in corpus:
        h.update(struct.pack("<Q", len(item)))
        h.update(item)
    return h.hexdigest()


def train(corpus: Iterable[bytes], *, order: int = 3, smoothing: float = 0.1) -> ByteModel:
    """Count every window of every item at every context length up to `order`."""
    if order < 0:
        raise ValueError("order must be >= 0")
    items = [bytes(item) for item in corpus]
    if not any(items):
        raise EmptyCorpusError("training corpus holds no bytes")

    tables: list[dict[bytes, dict[int, int]]] = [{} for _ in range(order + 1)]
    for seq in items:
        n = len(seq)
        for j, table in enumerate(tables):
            for i in range(j, n):
                succ = table.setdefault(seq[i - j : i], {})
                byte = seq[i]
                succ[byte] = succ.get(byte, 0) + 1

    return ByteModel(order, smoothing, tables, corpus_digest(items))


def _greedy_byte(counts: dict[int, int]) -> int:
    # smoothing adds the same mass everywhere, so argmax is over raw counts;
    # ties resolve to the smallest byte value to stay deterministic
    best = max(counts.values())
    return min(b for b, c in counts.items() if c == best)


def _sample(probs_like: np.ndarray, stream: Rng) -> int:
    total = float(probs_like.sum())
    cumulative = np.cumsum(probs_like)
    draw = stream.random() * total
    index = int(np.searchsorted(cumulative, draw, side="right"))
    return min(index, VOCAB - 1)


def _next_byte(model: ByteModel, context: bytes, policy: SamplingPolicy, stream: Rng | None) -> int:
    _, counts = model.lookup(context)
    if policy.mode == MODE_GREEDY:
        return _greedy_byte(counts)

    weights = np.full(VOCAB, model.smoothing, dtype=np.float64)
    for byte, count in counts.items():
        weights[byte] += count
    if policy.mode == MODE_TEMPERATURE:
        weights = weights ** (1.0 / policy.temperature)
        return _sample(weights, stream)
    # top_k: keep the k heaviest bytes (ties to smaller byte values), renormalize
    keep = np.argsort(-weights, kind="stable")[: policy.top_k]
    mask = np.zeros(VOCAB, dtype=np.float64)
    mask[keep] = weights[keep]
    return _sample(mask, stream)


def predict(model: ByteModel, prefix: bytes, length: int,
            policy: SamplingPolicy = GREEDY) -> bytes:
    """Continue `prefix` by `length` bytes, autoregressively."""
    if length < 0:
        raise ValueError("length must be >= 0")
    stream = None if policy.mode == MODE_GREEDY else Rng(policy.seed)
    tail = bytes(prefix[-model.order :] if model.order else b"")
    out = bytearray()
    for _ in range(length):
        byte = _next_byte(model, tail, policy, stream)
        out.append(byte)
        if model.order:
            tail = (tail + bytes([byte]))[-model.order :]
    return bytes(out)


def save_model(model: ByteModel, path: str | Path) -> None:
    """Write the model in its versioned container: header, sorted tables, checksum."""
    digest_ascii = model.training_digest.encode("ascii")
    body = bytearray()
    body += MODEL_MAGIC
    body += struct.pack("<BBd", MODEL_FORMAT_VERSION, model.order, model.smoothing)
    body += struct.pack("<H", len(digest_ascii))
    body += digest_ascii
    for j, table in enumerate(model.tables):
        body += struct.pack("<I", len(table))
        for context in sorted(table):
            successors = table[context]
            body += context
            body += struct.pack("<H", len(successors))
            for byte in sorted(successors):
                count = successors[byte]
                if count >= 2**32:
                    raise ValueError("per-pair count exceeds the container's 32-bit field")
                body += struct.pack("<BI", byte, count)
    body += hashlib.sha256(bytes(body)).digest()
    Path(path).write_bytes(bytes(body))


def load_model(path: str | Path) -> ByteModel:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MODEL_MAGIC:
        raise CorruptModelError("not a model file (bad magic)")
    if len(data) < 14 + 32:
        raise CorruptModelError("model file truncated")
    version, order, smoothing = struct.unpack_from("<BBd", data, 4)
    if version != MODEL_FORMAT_VERSION:
        raise VersionMismatchError(
            f"model format version {version}, this build reads {MODEL_FORMAT_VERSION}"
        )
    if hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise CorruptModelError("model file failed its checksum")

    pos = 14
    try:
        (digest_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        digest = data[pos : pos + digest_len].decode("ascii")
        pos += digest_len
        tables: list[dict[bytes, dict[int, int]]] = []
        for j in range(order + 1):
            (n_contexts,) = struct.unpack_from("<I", data, pos)
            pos += 4
            table: dict[bytes, dict[int, int]] = {}
            for _ in range(n_contexts):
                context = data[pos : pos + j]
                if len(context) != j:
                    raise CorruptModelError("model file ends inside a context key")
                pos += j
                (n_succ,) = struct.unpack_from("<H", data, pos)
                pos += 2
                successors: dict[int, int] = {}
                for _ in range(n_succ):
                    byte, count = struct.unpack_from("<BI", data, pos)
                    pos += 5
                    successors[byte] = count
                table[context] = successors
            tables.append(table)
    except struct.error as exc:
        raise CorruptModelError(f"model file ends mid-structure: {exc}") from exc
    if pos != len(data) - 32:
        raise CorruptModelError("model file has trailing bytes after its tables")
    return ByteModel(order, smoothing, tables, digest)
