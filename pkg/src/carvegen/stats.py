"""Per-set summary statistics and distribution exports.

Summaries use the sample standard deviation (n - 1 denominator) and a normal
approximation for the 95% confidence half-width, 1.96 * s / sqrt(n). Quantiles
use linear interpolation between order statistics (numpy's default scheme), and
box-plot whiskers extend to the most extreme datum within 1.5 IQR of the
nearest quartile.

The summary table is written twice: a flat CSV with one row per (metric, set)
pair, and an aligned plain-text table with metrics as rows and mean, standard
deviation, and confidence half-width grouped across sets as columns.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NonFiniteValueError, TooFewSamplesError

Z_95 = 1.96


@dataclass(frozen=True)
class Summary:
    metric: str
    set_id: str
    n: int
    mean: float
    median: float
    minimum: float
    maximum: float
    std: float
    ci95: float


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]


def _checked(values: Sequence[float], minimum: int) -> np.ndarray:
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.ndim != 1 or arr.size < minimum:
        raise TooFewSamplesError(
            f"need at least {minimum} values, got {arr.size}"
        )
    if not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise NonFiniteValueError(f"value at index {bad} is not finite")
    return arr


def summarize(
    values: Sequence[float], metric: str = "", set_id: str = ""
) -> Summary:
    arr = _checked(values, minimum=2)
    n = arr.size
    std = float(arr.std(ddof=1))
    return Summary(
        metric=metric,
        set_id=set_id,
        n=int(n),
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        minimum=float(arr.min()),
        maximum=float(arr.max()),
        std=std,
        ci95=Z_95 * std / math.sqrt(n),
    )


def quantiles(values: Sequence[float], points: Sequence[float]) -> list[float]:
    arr = _checked(values, minimum=1)
    for p in points:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"quantile point {p} outside [0, 1]")
    return [float(q) for q in np.quantile(arr, list(points))]


def box_stats(values: Sequence[float]) -> BoxStats:
    arr = _checked(values, minimum=1)
    q1, med, q3 = (float(q) for q in np.quantile(arr, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    low_fence = q1 - 1.5 * iqr
    high_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= low_fence) & (arr <= high_fence)]
    outliers = arr[(arr < low_fence) | (arr > high_fence)]
    return BoxStats(
        q1=q1,
        median=med,
        q3=q3,
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=tuple(float(v) for v in np.sort(outliers)),
    )


def export_distribution(
    values: Sequence[float], metric: str, set_id: str, path: str | Path
) -> None:
    """Write labelled raw values plus a box-plot sidecar next to them.

    The sidecar shares the stem of ``path`` with a ``.box.csv`` suffix and
    lists any outliers beyond the 1.5 IQR whiskers in its final column.
    """
    arr = _checked(values, minimum=1)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["set_id", "metric", "value"])
        for v in arr:
            writer.writerow([set_id, metric, repr(float(v))])
    box = box_stats(arr)
    sidecar = path.with_suffix(".box.csv")
    with sidecar.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "set_id",
                "metric",
                "q1",
                "median",
                "q3",
                "whisker_low",
                "whisker_high",
                "outliers",
            ]
        )
        writer.writerow(
            [
                set_id,
                metric,
                repr(box.q1),
                repr(box.median),
                repr(box.q3),
                repr(box.whisker_low),
                repr(box.whisker_high),
                ";".join(repr(v) for v in box.outliers),
            ]
        )


SUMMARY_COLUMNS = (
    "metric",
    "set",
    "n",
    "mean",
    "median",
    "min",
    "max",
    "std",
    "ci95",
)


def write_summary_csv(summaries: Iterable[Summary], path: str | Path) -> None:
    ordered = sorted(summaries, key=lambda s: (s.metric, s.set_id))
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in ordered:
            writer.writerow(
                [
                    s.metric,
                    s.set_id,
                    s.n,
                    repr(s.mean),
                    repr(s.median),
                    repr(s.minimum),
                    repr(s.maximum),
                    repr(s.std),
                    repr(s.ci95),
                ]
            )


def format_summary_text(summaries: Sequence[Summary]) -> str:
    """Aligned text table: metric rows; mean, std, ci95 grouped across sets."""
    sets = sorted({s.set_id for s in summaries})
    metrics = sorted({s.metric for s in summaries})
    lookup = {(s.metric, s.set_id): s for s in summaries}

    header_1 = ["metric"]
    header_2 = [""]
    for group in ("mean", "std", "ci95"):
        for set_id in sets:
            header_1.append(group)
            header_2.append(set_id)

    rows = [header_1, header_2]
    for metric in metrics:
        row = [metric]
        for field in ("mean", "std", "ci95"):
            for set_id in sets:
                s = lookup.get((metric, set_id))
                row.append("-" if s is None else f"{getattr(s, field):.4f}")
        rows.append(row)

    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def write_summary_text(summaries: Sequence[Summary], path: str | Path) -> None:
    Path(path).write_text(format_summary_text(summaries))
