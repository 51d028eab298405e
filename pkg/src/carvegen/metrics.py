"""Similarity measures between fragments: byte histograms and windowed structure.

Histogram measures operate on all 256 byte values. Cosine works on raw counts;
the chi-square statistic treats the predicted fragment's counts as observed and the
real fragment's as expected, substituting half a count when the expected bin is empty
but the observed one is not; divergence works on normalized distributions in base 2,
so it lives in [0, 1].

The structural measure compares grayscale images through a sliding uniform window,
returning both a per-window map and a mean that can be restricted to a pixel mask
(the region a predictor actually had to invent).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bmp
from .errors import (
    BmpError,
    DimensionMismatchError,
    EmptyInputError,
    LengthMismatchError,
    ReconstructionUnparseableError,
    WindowTooLargeError,
    ZeroVectorError,
)
from .fragments import FragmentRecord

CHI_ZERO_EXPECTED_SUBSTITUTE = 0.5
DEFAULT_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DATA_RANGE = 255.0


@dataclass(frozen=True, eq=False)
class ByteHistogram:
    bins: np.ndarray  # 256 nonnegative int64 counts
    total: int

    def __post_init__(self):
        if self.bins.shape != (256,):
            raise DimensionMismatchError("histogram must have 256 bins")


def byte_histogram(data: bytes) -> ByteHistogram:
    if not data:
        raise EmptyInputError("cannot histogram zero bytes")
    bins = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256).astype(np.int64)
    return ByteHistogram(bins=bins, total=len(data))


@dataclass(frozen=True, eq=False)
class ProbDistribution:
    probs: np.ndarray  # 256 nonnegative float64 values summing to 1

    def __post_init__(self):
        if self.probs.shape != (256,):
            raise DimensionMismatchError("distribution must have 256 entries")
        if not np.isfinite(self.probs).all() or (self.probs < 0).any():
            raise ZeroVectorError("distribution entries must be finite and nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ZeroVectorError("distribution does not sum to 1")


def normalize(hist: ByteHistogram) -> ProbDistribution:
    if hist.total <= 0:
        raise ZeroVectorError("histogram has no mass")
    return ProbDistribution(probs=hist.bins.astype(np.float64) / hist.total)


def cosine_similarity(a: ByteHistogram, b: ByteHistogram) -> float:
    """Angle-based similarity of raw count vectors; 1 is identical direction."""
    av = a.bins.astype(np.float64)
    bv = b.bins.astype(np.float64)
    norm_a = float(np.sqrt(av @ av))
    norm_b = float(np.sqrt(bv @ bv))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine undefined for an all-zero histogram")
    value = float(av @ bv) / (norm_a * norm_b)
    return min(max(value, 0.0), 1.0)


def chi_square(observed: ByteHistogram, expected: ByteHistogram) -> float:
    """Pearson statistic over raw counts; asymmetric, larger means further apart."""
    obs = observed.bins.astype(np.float64)
    exp = expected.bins.astype(np.float64)
    terms = np.zeros(256, dtype=np.float64)
    seen = exp > 0
    terms[seen] = (obs[seen] - exp[seen]) ** 2 / exp[seen]
    novel = (~seen) & (obs > 0)
    terms[novel] = (obs[novel] - CHI_ZERO_EXPECTED_SUBSTITUTE) ** 2 / CHI_ZERO_EXPECTED_SUBSTITUTE
    return float(terms.sum())


def _prob_array(p) -> np.ndarray:
    if isinstance(p, ProbDistribution):
        return p.probs
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError("distribution must be one-dimensional")
    return arr


def jsd(p, q) -> float:
    """Jensen-Shannon divergence, base 2, so identical is 0 and disjoint is 1."""
    pv = _prob_array(p)
    qv = _prob_array(q)
    if pv.shape != qv.shape:
        raise DimensionMismatchError(f"distribution lengths differ: {pv.shape} vs {qv.shape}")
    mid = (pv + qv) / 2.0

    def kl(a: np.ndarray) -> float:
        support = a > 0
        return float(np.sum(a[support] * np.log2(a[support] / mid[support])))

    value = 0.5 * kl(pv) + 0.5 * kl(qv)
    return min(max(value, 0.0), 1.0)


@dataclass(frozen=True, eq=False)
class SsimResult:
    global_value: float
    local_map: np.ndarray  # one value per fully interior window placement
    window: int
    c1: float
    c2: float
    mask: np.ndarray | None  # the pixel mask the mean was restricted to, if any


def _window_sums(a: np.ndarray, window: int) -> np.ndarray:
    c = np.cumsum(np.cumsum(a, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return c[window:, window:] - c[:-window, window:] - c[window:, :-window] + c[:-window, :-window]


def _as_gray_array(x) -> np.ndarray:
    if isinstance(x, bmp.GrayImage):
        return x.as_array().astype(np.float64)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError("gray image must be two-dimensional")
    return arr


def ssim(x, y, *, window: int = DEFAULT_WINDOW, mask: np.ndarray | None = None) -> SsimResult:
    """Mean structural similarity over fully interior uniform windows.

    With a mask, the mean covers only windows whose center pixel is masked in; the
    local map always covers every placement.
    """
    xa = _as_gray_array(x)
    ya = _as_gray_array(y)
    if xa.shape != ya.shape:
        raise DimensionMismatchError(f"image shapes differ: {xa.shape} vs {ya.shape}")
    height, width = xa.shape
    if window < 1 or window > min(height, width):
        raise WindowTooLargeError(
            f"window {window} does not fit a {height}x{width} image"
        )

    n = float(window * window)
    mu_x = _window_sums(xa, window) / n
    mu_y = _window_sums(ya, window) / n
    var_x = _window_sums(xa * xa, window) / n - mu_x * mu_x
    var_y = _window_sums(ya * ya, window) / n - mu_y * mu_y
    cov = _window_sums(xa * ya, window) / n - mu_x * mu_y

    c1 = (SSIM_K1 * SSIM_DATA_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DATA_RANGE) ** 2
    local = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )

    if mask is None:
        global_value = float(local.mean())
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != xa.shape:
            raise DimensionMismatchError("mask shape must match the images")
        center = window // 2
        selected = mask[center : center + local.shape[0], center : center + local.shape[1]]
        if not selected.any():
            raise EmptyInputError("mask covers no window centers")
        global_value = float(local[selected].mean())

    return SsimResult(
        global_value=global_value, local_map=local, window=window, c1=c1, c2=c2, mask=mask
    )


def predicted_region_mask(img: bmp.BmpImage, cut: int) -> np.ndarray:
    """Pixels owning at least one file byte at or past the cut, as a bool array."""
    rows = np.arange(img.height)[:, None]
    cols = np.arange(img.width)[None, :]
    if img.row_order is bmp.RowOrder.BOTTOM_UP:
        stored = img.height - 1 - rows
    else:
        stored = rows
    first_byte = bmp.HEADER_SIZE + stored * img.stride + 3 * cols
    return (first_byte + 2) >= cut


def fragment_ssim(record: FragmentRecord, predicted: bytes,
                  *, window: int = DEFAULT_WINDOW) -> SsimResult:
    """Structural similarity of the reconstruction against the original image.

    The reconstruction is the known piece followed by the predicted continuation;
    both images are grayscaled, and the mean is restricted to pixels the predictor
    was responsible for.
    """
    real_length = len(record.full_bytes) - record.cut
    if len(predicted) != real_length:
        raise LengthMismatchError(
            f"predicted fragment holds {len(predicted)} bytes, needs {real_length}"
        )
    reconstructed = record.input_fragment + predicted
    try:
        original_img = bmp.parse_bmp(record.full_bytes)
        reconstructed_img = bmp.parse_bmp(reconstructed)
    except BmpError as exc:
        raise ReconstructionUnparseableError(str(exc)) from exc
    mask = predicted_region_mask(original_img, record.cut)
    return ssim(
        bmp.to_grayscale(reconstructed_img),
        bmp.to_grayscale(original_img),
        window=window,
        mask=mask,
    )


def heatmap_pgm(local_map: np.ndarray) -> bytes:
    """Binary grayscale image of a local map, [-1, 1] mapped linearly onto [0, 255]."""
    clipped = np.clip(np.asarray(local_map, dtype=np.float64), -1.0, 1.0)
    scaled = np.floor((clipped + 1.0) / 2.0 * 255.0 + 0.5).astype(np.uint8)
    height, width = scaled.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + scaled.tobytes()


def write_heatmap(result: SsimResult, pgm_path: str | Path, csv_path: str | Path) -> None:
    Path(pgm_path).write_bytes(heatmap_pgm(result.local_map))
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        for row in result.local_map:
            writer.writerow([repr(float(v)) for v in row])
