"""Strict codec for uncompressed 24-bit bitmaps with a 40-byte info header.

The supported subset is deliberately narrow: BM signature, 54-byte total header,
pixel array immediately after it, no compression, no palette. Within that subset
parsing is total and encode(parse(x)) == x bit-exactly for bottom-up files; top-down
files (negative height) are accepted but normalize to bottom-up on re-encode.

Byte offsets are the currency of the rest of the toolkit: fragments are cut at file
offsets, and `byte_offset_to_pixel` / `pixel_byte_offsets` translate between file
offsets and visual pixel coordinates so masks can be built for partially known images.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MalformedHeaderError,
    OffsetOutOfRangeError,
    TruncatedFileError,
    UnsupportedVariantError,
)

HEADER_SIZE = 54  # 14-byte file header + 40-byte info header
INFO_HEADER_SIZE = 40

# channel indices within a pixel triple, matching on-disk order
CHANNEL_BLUE = 0
CHANNEL_GREEN = 1
CHANNEL_RED = 2


class RowOrder(enum.Enum):
    BOTTOM_UP = "bottom_up"
    TOP_DOWN = "top_down"


def row_stride(width: int) -> int:
    """Bytes per stored pixel row: 3 bytes per pixel, padded up to a multiple of 4."""
    return ((3 * width + 3) // 4) * 4


@dataclass(frozen=True)
class BmpImage:
    """A decoded bitmap.

    `pixels` holds blue,green,red triples row-major in visual top-down order with no
    padding, regardless of how the source file stored its rows; `row_order` records the
    storage order of the source so file offsets can still be mapped to pixels.

    The remaining fields preserve header values that carry no pixel information but
    must survive a parse/encode round trip bit-exactly.
    """

    width: int
    height: int
    pixels: bytes
    row_order: RowOrder = RowOrder.BOTTOM_UP
    pixel_data_offset: int = HEADER_SIZE
    reserved1: int = 0
    reserved2: int = 0
    image_size_field: int | None = None  # None means "write stride*height"
    x_ppm: int = 0
    y_ppm: int = 0
    colors_used: int = 0
    colors_important: int = 0
    row_padding: bytes = b""  # nonzero padding bytes of the source, emit-row-major

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise MalformedHeaderError("image dimensions must be positive")
        if len(self.pixels) != 3 * self.width * self.height:
            raise MalformedHeaderError(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"expected {3 * self.width * self.height}"
            )
        if self.pixel_data_offset != HEADER_SIZE:
            raise UnsupportedVariantError("pixel data must start at offset 54")
        pad = row_stride(self.width) - 3 * self.width
        if self.row_padding and len(self.row_padding) != pad * self.height:
            raise MalformedHeaderError("row_padding length disagrees with geometry")

    @property
    def stride(self) -> int:
        return row_stride(self.width)

    @property
    def file_size(self) -> int:
        return HEADER_SIZE + self.stride * self.height


@dataclass(frozen=True)
class GrayImage:
    width: int
    height: int
    values: bytes  # one luma byte per pixel, row-major top-down

    def __post_init__(self):
        if len(self.values) != self.width * self.height:
            raise MalformedHeaderError("gray buffer length disagrees with dimensions")

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.values, dtype=np.uint8).reshape(self.height, self.width)


def parse_bmp(data: bytes) -> BmpImage:
    """Parse `data` into a BmpImage, or raise a precise error saying why not."""
    if len(data) < 2 or data[:2] != b"BM":
        raise MalformedHeaderError("missing BM signature")
    if len(data) < HEADER_SIZE:
        raise TruncatedFileError(f"only {len(data)} bytes, header needs {HEADER_SIZE}")

    file_size, reserved1, reserved2, data_offset = struct.unpack_from("<IHHI", data, 2)
    (
        info_size,
        width,
        height_raw,
        planes,
        bpp,
        compression,
        image_size_field,
        x_ppm,
        y_ppm,
        colors_used,
        colors_important,
    ) = struct.unpack_from("<IiiHHIIiiII", data, 14)

    if info_size != INFO_HEADER_SIZE:
        raise UnsupportedVariantError(f"info header of {info_size} bytes, only 40 supported")
    if planes != 1:
        raise MalformedHeaderError(f"planes field is {planes}, must be 1")
    if bpp != 24:
        raise UnsupportedVariantError(f"{bpp} bits per pixel, only 24 supported")
    if compression != 0:
        raise UnsupportedVariantError(f"compression mode {compression}, only 0 supported")
    if data_offset != HEADER_SIZE:
        raise UnsupportedVariantError(f"pixel data at offset {data_offset}, only 54 supported")
    if width <= 0:
        raise MalformedHeaderError(f"width {width} not positive")
    if height_raw == 0:
        raise MalformedHeaderError("height is zero")

    order = RowOrder.TOP_DOWN if height_raw < 0 else RowOrder.BOTTOM_UP
    height = abs(height_raw)
    stride = row_stride(width)
    expected_size = HEADER_SIZE + stride * height
    if file_size != expected_size:
        raise MalformedHeaderError(
            f"size field {file_size} disagrees with dimensions ({expected_size} expected)"
        )
    if len(data) < expected_size:
        raise TruncatedFileError(f"{len(data)} bytes present, {expected_size} declared")
    if len(data) > expected_size:
        raise MalformedHeaderError(f"{len(data) - expected_size} trailing bytes after pixel array")

    pad = stride - 3 * width
    pixels = bytearray(3 * width * height)
    padding = bytearray()
    for stored_row in range(height):
        start = HEADER_SIZE + stored_row * stride
        visual_row = height - 1 - stored_row if order is RowOrder.BOTTOM_UP else stored_row
        dest = 3 * width * visual_row
        pixels[dest : dest + 3 * width] = data[start : start + 3 * width]
        if pad:
            padding += data[start + 3 * width : start + stride]

    return BmpImage(
        width=width,
        height=height,
        pixels=bytes(pixels),
        row_order=order,
        reserved1=reserved1,
        reserved2=reserved2,
        # the computed value is the canonical encoding; only remember deviations
        image_size_field=None if image_size_field == stride * height else image_size_field,
        x_ppm=x_ppm,
        y_ppm=y_ppm,
        colors_used=colors_used,
        colors_important=colors_important,
        # zero padding is the canonical default; only remember it when it carries bits
        row_padding=bytes(padding) if any(padding) else b"",
    )


def encode_bmp(img: BmpImage) -> bytes:
    """Serialize to the canonical on-disk form: bottom-up rows, positive height."""
    stride = img.stride
    pad = stride - 3 * img.width
    image_size = img.image_size_field
    if image_size is None:
        image_size = stride * img.height

    out = bytearray()
    out += b"BM"
    out += struct.pack("<IHHI", img.file_size, img.reserved1, img.reserved2, HEADER_SIZE)
    out += struct.pack(
        "<IiiHHIIiiII",
        INFO_HEADER_SIZE,
        img.width,
        img.height,
        1,
        24,
        0,
        image_size,
        img.x_ppm,
        img.y_ppm,
        img.colors_used,
        img.colors_important,
    )
    zero_pad = b"\x00" * pad
    for stored_row in range(img.height):
        visual_row = img.height - 1 - stored_row
        start = 3 * img.width * visual_row
        out += img.pixels[start : start + 3 * img.width]
        if pad:
            if img.row_padding:
                out += img.row_padding[stored_row * pad : (stored_row + 1) * pad]
            else:
                out += zero_pad
    return bytes(out)


def byte_offset_to_pixel(img: BmpImage, offset: int) -> tuple[int, int, int] | None:
    """Map a file offset to (visual row, col, channel), or None for header/padding bytes.

    Channel is 0 for blue, 1 for green, 2 for red, matching the on-disk triple order.
    """
    if not 0 <= offset < img.file_size:
        raise OffsetOutOfRangeError(f"offset {offset} outside file of {img.file_size} bytes")
    if offset < HEADER_SIZE:
        return None
    rel = offset - HEADER_SIZE
    stored_row, within = divmod(rel, img.stride)
    if within >= 3 * img.width:
        return None
    col, channel = divmod(within, 3)
    if img.row_order is RowOrder.BOTTOM_UP:
        row = img.height - 1 - stored_row
    else:
        row = stored_row
    return (row, col, channel)


def pixel_byte_offsets(img: BmpImage, row: int, col: int) -> tuple[int, int, int]:
    """File offsets of a pixel's blue, green, red bytes (row/col in visual coordinates)."""
    if not (0 <= row < img.height and 0 <= col < img.width):
        raise OffsetOutOfRangeError(f"pixel ({row}, {col}) outside {img.width}x{img.height}")
    if img.row_order is RowOrder.BOTTOM_UP:
        stored_row = img.height - 1 - row
    else:
        stored_row = row
    base = HEADER_SIZE + stored_row * img.stride + 3 * col
    return (base, base + 1, base + 2)


def to_grayscale(img: BmpImage) -> GrayImage:
    """BT.601 luma, rounded half away from zero to an integer in [0, 255]."""
    arr = np.frombuffer(img.pixels, dtype=np.uint8).reshape(img.height, img.width, 3)
    arr = arr.astype(np.float64)
    luma = 0.299 * arr[:, :, CHANNEL_RED] + 0.587 * arr[:, :, CHANNEL_GREEN] + 0.114 * arr[:, :, CHANNEL_BLUE]
    values = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(width=img.width, height=img.height, values=values.tobytes())


def resize_nearest(img: BmpImage, new_width: int, new_height: int) -> BmpImage:
    """Nearest-neighbor resample with pure integer source indexing."""
    if new_width < 1 or new_height < 1:
        raise MalformedHeaderError("target dimensions must be positive")
    src = np.frombuffer(img.pixels, dtype=np.uint8).reshape(img.height, img.width, 3)
    rows = (np.arange(new_height) * img.height) // new_height
    cols = (np.arange(new_width) * img.width) // new_width
    dst = src[rows][:, cols]
    return BmpImage(width=new_width, height=new_height, pixels=dst.tobytes())


def require_dimensions(img: BmpImage, width: int, height: int) -> None:
    """Enforce a profile's exact geometry; the codec itself never hard-codes one."""
    if img.width != width or img.height != height:
        raise UnsupportedVariantError(
            f"image is {img.width}x{img.height}, profile requires {width}x{height}"
        )
