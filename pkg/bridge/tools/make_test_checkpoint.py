#!/usr/bin/env python3
"""Build a tiny TorchScript byte language model for exercising the bridge.

The weights are randomly initialized and never trained: the artifact exists so
the tests have a real TorchScript program honoring the checkpoint contract
(int64 tokens (1, n) in, float32 logits (1, n, 256) out, an exported
context_window()). A recurrent core keeps every position causal without any
masking bookkeeping.

    python3 tools/make_test_checkpoint.py /tmp/tiny.pt --seed 7
"""
from __future__ import annotations

import argparse

import torch
from torch import nn

VOCAB_IN = 257   # byte values plus the start token
VOCAB_OUT = 256


class TinyByteLM(nn.Module):
    def __init__(self, dim: int, window: int):
        super().__init__()
        self.window = window
        self.embed = nn.Embedding(VOCAB_IN, dim)
        self.rnn = nn.GRU(dim, dim, batch_first=True)
        self.head = nn.Linear(dim, VOCAB_OUT)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        hidden, _ = self.rnn(self.embed(tokens))
        return self.head(hidden)

    @torch.jit.export
    def context_window(self) -> int:
        return self.window


def build(seed: int, dim: int, window: int) -> torch.jit.ScriptModule:
    torch.manual_seed(seed)
    return torch.jit.script(TinyByteLM(dim, window).eval())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", help="where to write the TorchScript artifact")
    parser.add_argument("--seed", type=int, default=0, help="weight init seed")
    parser.add_argument("--dim", type=int, default=48, help="embedding width")
    parser.add_argument("--window", type=int, default=96,
                        help="context window reported by the artifact")
    args = parser.parse_args(argv)
    if args.window < 2:
        parser.error("--window must be at least 2")

    scripted = build(args.seed, args.dim, args.window)
    torch.jit.save(scripted, args.out)
    params = sum(p.numel() for p in scripted.parameters())
    print(f"wrote {args.out} ({params} parameters, window {args.window})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
