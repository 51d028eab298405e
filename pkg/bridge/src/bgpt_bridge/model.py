"""Checkpoint loading and autoregressive byte generation.

The bridge contains no transformer of its own. It loads a TorchScript artifact
and drives it one byte at a time; whatever the network does internally (patch
pooling, hierarchical decoding, plain attention) was baked in when the artifact
was exported. The bridge relies only on this narrow contract:

  * the module is callable as ``module(tokens)`` with ``tokens`` of dtype
    int64 and shape (1, n), returning logits of shape (1, n, 256) where
    position t scores the byte following token t
  * the module exports ``context_window() -> int``, the most tokens a single
    call may see (including the leading start token); at least 2

Token space is byte values 0..255 plus START_TOKEN (256), which the bridge
prepends so that an empty prefix still yields a next-byte distribution. Once
the running history outgrows the window the oldest bytes fall off: generation
depends only on the trailing ``context_window() - 1`` bytes of history.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import torch

START_TOKEN = 256
DECODING_MODES = ("greedy", "sample")


class BridgeError(Exception):
    """A configuration or checkpoint problem the bridge reports before serving."""


@dataclasses.dataclass(frozen=True)
class BridgeConfig:
    checkpoint: Path
    device: str = "cpu"
    mode: str = "greedy"
    temperature: float = 1.0
    top_k: int | None = None
    seed: int = 0
    max_output_bytes: int = 8192

    def validate(self) -> None:
        if not Path(self.checkpoint).is_file():
            raise BridgeError(f"checkpoint not found: {self.checkpoint}")
        if self.mode not in DECODING_MODES:
            raise BridgeError(f"unknown decoding mode {self.mode!r}")
        if not self.temperature > 0:
            raise BridgeError(f"temperature must be positive, got {self.temperature}")
        if self.top_k is not None and self.top_k < 1:
            raise BridgeError(f"top-k must be at least 1, got {self.top_k}")
        if self.max_output_bytes < 1:
            raise BridgeError(f"max output must be at least 1 byte, got {self.max_output_bytes}")


class ByteGenerator:
    """One loaded checkpoint answering one request at a time.

    Every step re-runs the model over the trailing window rather than carrying
    cached state, which keeps the artifact contract stateless at the cost of
    quadratic work per request. Greedy decoding never touches the seed, so its
    output is a pure function of prefix and checkpoint.
    """

    def __init__(self, module, config: BridgeConfig, window: int, device: torch.device):
        self.module = module
        self.config = config
        self.window = window
        self.device = device
        self._rng = torch.Generator(device="cpu")
        self._rng.manual_seed(config.seed)

    def generate(self, prefix: bytes, requested: int) -> bytes:
        budget = min(requested, self.config.max_output_bytes)
        history = bytearray(prefix)
        produced = bytearray()
        while len(produced) < budget:
            value = self._next_byte(history)
            produced.append(value)
            history.append(value)
        return bytes(produced)

    def _next_byte(self, history: bytearray) -> int:
        tail = bytes(history[-(self.window - 1):])
        tokens = torch.tensor([[START_TOKEN, *tail]], dtype=torch.int64, device=self.device)
        with torch.inference_mode():
            logits = self.module(tokens)[0, -1]
        logits = logits.to(dtype=torch.float32, device="cpu")
        if self.config.mode == "greedy":
            return int(torch.argmax(logits))
        scaled = logits / self.config.temperature
        if self.config.top_k is not None and self.config.top_k < scaled.numel():
            # ties at the k-th score all stay in, matching common practice
            kth = torch.topk(scaled, self.config.top_k).values[-1]
            scaled = torch.where(scaled < kth, torch.full_like(scaled, float("-inf")), scaled)
        probs = torch.softmax(scaled, dim=0)
        return int(torch.multinomial(probs, 1, generator=self._rng))


def load_model(config: BridgeConfig) -> ByteGenerator:
    """Validate the config, load the artifact, and prove it honors the contract."""
    config.validate()
    try:
        device = torch.device(config.device)
    except (RuntimeError, ValueError) as exc:
        raise BridgeError(f"bad device {config.device!r}: {exc}") from exc
    try:
        module = torch.jit.load(str(config.checkpoint), map_location="cpu")
    except Exception as exc:
        raise BridgeError(f"cannot load checkpoint {config.checkpoint}: {exc}") from exc
    try:
        module = module.to(device)
    except Exception as exc:
        raise BridgeError(f"cannot move checkpoint to {config.device!r}: {exc}") from exc
    module.eval()
    try:
        window = int(module.context_window())
    except Exception as exc:
        raise BridgeError("checkpoint does not export context_window()") from exc
    if window < 2:
        raise BridgeError(f"context window {window} is too small to predict anything")
    _probe(module, device)
    return ByteGenerator(module, config, window, device)


def _probe(module, device: torch.device) -> None:
    """One tiny forward call so a wrong-shaped artifact fails before the handshake."""
    tokens = torch.tensor([[START_TOKEN, 0]], dtype=torch.int64, device=device)
    try:
        with torch.inference_mode():
            out = module(tokens)
    except Exception as exc:
        raise BridgeError(f"checkpoint rejected a probe input: {exc}") from exc
    shape = tuple(out.shape)
    if shape != (1, 2, 256):
        raise BridgeError(f"probe logits have shape {shape}, contract needs (1, 2, 256)")
