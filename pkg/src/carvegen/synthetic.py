"""Synthetic corpora for tests, demos, and desk-scale experiments.

Images are banded vertical gradients on a coarse shared value lattice: every
channel value is a multiple of 16, each image picks its base level, per-row
step, per-channel cast, and band pattern from small shared sets, and a sparse
pixel salt keeps files distinct. The shared lattice matters: contexts seen in
held-out images recur in training images, so small context models genuinely
learn the corpus rather than memorizing single files. Decoy blobs imitate the
framing of common media containers but are filled with generated content;
nothing ever parses them.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import bmp
from .rng import Rng, substream

VALUE_STEP = 16
_RAMP_SEGMENT_ROWS = 4
_DIRECTIONS = (-1, 0, 0, 1)
_CASTS = (0, VALUE_STEP, 2 * VALUE_STEP)
_SALT_RATE = 1 / 64
# headroom for the largest cast, one band lift, and one salt lift keeps every
# channel value on the lattice without clipping, so gradients never flatten
# into plateaus that a greedy continuation would latch onto
_MAX_LEVEL = 240 - 2 * VALUE_STEP - VALUE_STEP - VALUE_STEP

DECOY_FORMATS = ("wav", "jpeg", "png", "mp4")

_DECOY_HEADERS = {
    "wav": b"RIFF\x00\x10\x00\x00WAVEfmt ",
    "jpeg": b"\xff\xd8\xff\xe0\x00\x10JFIF\x00",
    "png": b"\x89PNG\r\n\x1a\n\x00\x00\x00\rIHDR",
    "mp4": b"\x00\x00\x00\x18ftypmp42",
}


def make_image(stream: Rng, size: int = 32) -> bmp.BmpImage:
    """One random banded-gradient image; all structure derives from `stream`."""
    direction = stream.choice(_DIRECTIONS)
    ramp_span = min(
        VALUE_STEP * ((size - 1) // _RAMP_SEGMENT_ROWS), _MAX_LEVEL
    )
    if direction > 0:
        bases = range(0, _MAX_LEVEL - ramp_span + 1, VALUE_STEP)
    elif direction < 0:
        bases = range(ramp_span, _MAX_LEVEL + 1, VALUE_STEP)
    else:
        bases = range(0, _MAX_LEVEL + 1, VALUE_STEP)
    base = stream.choice(tuple(bases))
    casts = [stream.choice(_CASTS) for _ in range(3)]
    band_period = 4 + stream.randrange(6)
    band_phase = stream.randrange(band_period)
    band_channel = stream.randrange(3)

    rows = np.arange(size, dtype=np.int64)[:, None]
    ramp = direction * VALUE_STEP * (rows // _RAMP_SEGMENT_ROWS)
    level = base + ramp + np.zeros((size, size), dtype=np.int64)

    channels = []
    for c in range(3):
        field = level + casts[c]
        if c == band_channel:
            banded = (np.arange(size) + band_phase) % band_period == 0
            field = field + VALUE_STEP * banded[:, None]
        channels.append(field)

    # sparse per-pixel salt: lifts a pixel one lattice step on all channels
    salt_rng = np.random.default_rng(stream.next_u64())
    salt = salt_rng.random((size, size)) < _SALT_RATE
    pixels = np.stack(channels, axis=-1) + VALUE_STEP * salt[:, :, None]
    pixels = np.clip(pixels, 0, 255 - 255 % VALUE_STEP).astype(np.uint8)
    return bmp.BmpImage(width=size, height=size, pixels=pixels.tobytes())


def write_corpus(directory: str | Path, count: int, seed: int, size: int = 32) -> list[Path]:
    """Write `count` synthetic bitmaps named img00000.bmp, img00001.bmp, ..."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stream = substream(seed, "synthetic-corpus")
    paths = []
    for i in range(count):
        path = directory / f"img{i:05d}.bmp"
        path.write_bytes(bmp.encode_bmp(make_image(stream, size)))
        paths.append(path)
    return paths


def make_decoy_blob(stream: Rng, tag: str, length: int) -> bytes:
    """A decoy byte source: recognizable magic, then mixed noise and repetition."""
    header = _DECOY_HEADERS.get(tag, b"")
    body = bytearray(header[:length])
    noise_rng = np.random.default_rng(stream.next_u64())
    while len(body) < length:
        if stream.random() < 0.5:
            chunk = noise_rng.integers(0, 256, size=stream.randrange(2048) + 256,
                                       dtype=np.uint8).tobytes()
        else:
            pattern = noise_rng.integers(0, 256, size=stream.randrange(12) + 2,
                                         dtype=np.uint8).tobytes()
            chunk = pattern * (stream.randrange(200) + 20)
        body += chunk
    return bytes(body[:length])


def write_decoy_sources(
    directory: str | Path,
    seed: int,
    *,
    length: int = 65536,
    formats: tuple[str, ...] = DECOY_FORMATS,
    per_format: int = 2,
) -> list[tuple[str, Path]]:
    """Write decoy source files; returns (format_tag, path) pairs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stream = substream(seed, "synthetic-decoys")
    out = []
    for tag in formats:
        for i in range(per_format):
            # suffix carries the format so pool builders can tag entries
            path = directory / f"{tag}{i}.{tag}"
            path.write_bytes(make_decoy_blob(stream, tag, length))
            out.append((tag, path))
    return out


def _main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="generate a synthetic corpus and decoy sources")
    parser.add_argument("out", type=Path)
    parser.add_argument("--count", type=int, default=60)
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--decoy-length", type=int, default=65536)
    args = parser.parse_args(argv)

    images = write_corpus(args.out / "images", args.count, args.seed, args.size)
    decoys = write_decoy_sources(args.out / "decoys", args.seed, length=args.decoy_length)
    print(f"wrote {len(images)} images and {len(decoys)} decoy sources under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(_main())
