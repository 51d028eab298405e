"""Rank candidate pools against a predicted continuation.

Each candidate is compared to the prediction on three byte-level signals and
combined into a single score where smaller means a closer match:

    score = chi_weight * chi + jsd_weight * jsd - cosine_weight * cosine

Chi-square treats the prediction as the observed counts and the candidate as
the expected counts. Ties are broken by pool position so rankings are total
and reruns reproduce them byte for byte.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from . import metrics
from .errors import LengthMismatchError
from .fragments import FragmentPool

TOP_RANK_WINDOW = 5


@dataclass(frozen=True)
class MatchWeights:
    chi_weight: float = 0.01
    jsd_weight: float = 10.0
    cosine_weight: float = 10.0

    def __post_init__(self) -> None:
        for name in ("chi_weight", "jsd_weight", "cosine_weight"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    def scaled(self, factor: float) -> "MatchWeights":
        if not factor > 0.0:
            raise ValueError(f"scale factor must be positive, got {factor}")
        return replace(
            self,
            chi_weight=self.chi_weight * factor,
            jsd_weight=self.jsd_weight * factor,
            cosine_weight=self.cosine_weight * factor,
        )


DEFAULT_WEIGHTS = MatchWeights()


def combined_score(
    chi: float,
    jsd_value: float,
    cosine: float,
    weights: MatchWeights = DEFAULT_WEIGHTS,
) -> float:
    return (
        weights.chi_weight * chi
        + weights.jsd_weight * jsd_value
        - weights.cosine_weight * cosine
    )


@dataclass(frozen=True)
class RankedCandidate:
    rank: int
    pool_index: int
    format_tag: str
    is_true: bool
    score: float
    chi: float
    jsd: float
    cosine: float


@dataclass(frozen=True)
class MatchResult:
    source_id: str
    ranking: tuple[RankedCandidate, ...]
    true_rank: int

    @property
    def hit_at_one(self) -> bool:
        return self.true_rank == 1

    @property
    def hit_in_window(self) -> bool:
        return self.true_rank <= TOP_RANK_WINDOW


def rank_pool(
    predicted: bytes,
    pool: FragmentPool,
    *,
    weights: MatchWeights = DEFAULT_WEIGHTS,
    source_id: str = "",
) -> MatchResult:
    if len(predicted) != pool.target_length:
        raise LengthMismatchError(
            f"predicted fragment is {len(predicted)} bytes, "
            f"pool holds {pool.target_length}-byte candidates"
        )
    pred_hist = metrics.byte_histogram(predicted)
    pred_dist = metrics.normalize(pred_hist)

    scored = []
    for entry in pool.entries:
        cand_hist = metrics.byte_histogram(entry.data)
        cand_dist = metrics.normalize(cand_hist)
        chi = metrics.chi_square(pred_hist, cand_hist)
        jsd_value = metrics.jsd(pred_dist, cand_dist)
        cosine = metrics.cosine_similarity(pred_hist, cand_hist)
        scored.append(
            (
                combined_score(chi, jsd_value, cosine, weights),
                entry.pool_index,
                entry.format_tag,
                chi,
                jsd_value,
                cosine,
            )
        )
    scored.sort(key=lambda row: (row[0], row[1]))

    ranking = []
    true_rank = 0
    for rank, (score, pool_index, tag, chi, jsd_value, cosine) in enumerate(
        scored, start=1
    ):
        is_true = pool_index == pool.true_index
        if is_true:
            true_rank = rank
        ranking.append(
            RankedCandidate(
                rank=rank,
                pool_index=pool_index,
                format_tag=tag,
                is_true=is_true,
                score=score,
                chi=chi,
                jsd=jsd_value,
                cosine=cosine,
            )
        )
    return MatchResult(
        source_id=source_id, ranking=tuple(ranking), true_rank=true_rank
    )


@dataclass(frozen=True)
class Tally:
    rank_one: int
    in_window: int
    missed: int

    @property
    def total(self) -> int:
        return self.rank_one + self.in_window + self.missed

    def as_line(self) -> str:
        return (
            f"rank1={self.rank_one} "
            f"top{TOP_RANK_WINDOW}={self.rank_one + self.in_window} "
            f"missed={self.missed} total={self.total}"
        )


def tally(results: Iterable[MatchResult], top_k: int = TOP_RANK_WINDOW) -> Tally:
    if top_k < 1:
        raise ValueError(f"top_k must be at least 1, got {top_k}")
    rank_one = in_window = missed = 0
    for result in results:
        if result.true_rank == 1:
            rank_one += 1
        elif result.true_rank <= top_k:
            in_window += 1
        else:
            missed += 1
    return Tally(rank_one=rank_one, in_window=in_window, missed=missed)


def write_rankings(
    results: Iterable[MatchResult], path: str | Path, *, top: int | None = None
) -> None:
    """One row per ranked candidate; cap per-result rows with ``top``."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "source_id",
                "rank",
                "pool_index",
                "format_tag",
                "is_true",
                "score",
                "chi_square",
                "jsd",
                "cosine",
            ]
        )
        for result in results:
            rows = result.ranking if top is None else result.ranking[:top]
            for cand in rows:
                writer.writerow(
                    [
                        result.source_id,
                        cand.rank,
                        cand.pool_index,
                        cand.format_tag,
                        int(cand.is_true),
                        repr(cand.score),
                        repr(cand.chi),
                        repr(cand.jsd),
                        repr(cand.cosine),
                    ]
                )


def write_tally(counts: Tally, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank_one", "in_top_window", "missed", "total"])
        writer.writerow(
            [counts.rank_one, counts.in_window, counts.missed, counts.total]
        )
