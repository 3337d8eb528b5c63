"""Depth evaluation metrics, corpus aggregation and leaderboard ranking."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .core import (
    TRACK_DEFAULTS,
    DepthMap,
    EmptyCorpusError,
    EmptyOverlapError,
    InvalidInputError,
    ValidPairView,
    align_pair,
)

METRIC_FIELDS = ("abs_rel", "sq_rel", "rmse", "log_rmse", "delta1", "delta2", "delta3")
DELTA_BASE = 1.25


@dataclass(frozen=True)
class MetricReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    log_rmse: float
    delta1: float
    delta2: float
    delta3: float
    n_pixels: int = 0

    def __post_init__(self):
        for name in ("abs_rel", "sq_rel", "rmse", "log_rmse"):
            v = getattr(self, name)
            if not math.isnan(v) and v < 0:
                raise InvalidInputError(f"{name} must be nonnegative")
        for name in ("delta1", "delta2", "delta3"):
            v = getattr(self, name)
            if not math.isnan(v) and not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        kwargs = {f.name: d.get(f.name, math.nan) for f in fields(cls)}
        kwargs["n_pixels"] = int(d.get("n_pixels", 0) or 0)
        return cls(**{k: (float(v) if k != "n_pixels" else v) for k, v in kwargs.items()})


@dataclass(frozen=True)
class LeaderboardEntry:
    name: str
    report: MetricReport

    def __post_init__(self):
        if not self.name:
            raise InvalidInputError("leaderboard entry needs a name")


@dataclass(frozen=True)
class RankedEntry:
    rank: int
    entry: LeaderboardEntry
    key: float
    tie_group: int
    tied: bool


@dataclass(frozen=True)
class ScoreOptions:
    median_scale: bool = True
    min_depth: float = 1e-3
    max_depth: float = 80.0

    @classmethod
    def for_track(cls, track: int) -> "ScoreOptions":
        d = TRACK_DEFAULTS[track]
        return cls(median_scale=d.median_scale, min_depth=d.min_depth, max_depth=d.max_depth)


def _check(pair: ValidPairView) -> None:
    if len(pair) == 0:
        raise EmptyOverlapError("empty pair")


def abs_rel(pair: ValidPairView) -> float:
    _check(pair)
    return float(np.mean(np.abs(pair.gt - pair.pred) / pair.gt))


def sq_rel(pair: ValidPairView) -> float:
    _check(pair)
    return float(np.mean((pair.gt - pair.pred) ** 2 / pair.gt))


def rmse(pair: ValidPairView) -> float:
    _check(pair)
    return float(np.sqrt(np.mean((pair.gt - pair.pred) ** 2)))


def log_rmse(pair: ValidPairView) -> float:
    _check(pair)
    return float(np.sqrt(np.mean((np.log(pair.gt) - np.log(pair.pred)) ** 2)))


def delta_accuracy(pair: ValidPairView, t: int) -> float:
    """Fraction of pixels with max(gt/pred, pred/gt) < 1.25**t."""
    _check(pair)
    if t not in (1, 2, 3):
        raise InvalidInputError("t must be 1, 2 or 3")
    ratio = np.maximum(pair.gt / pair.pred, pair.pred / pair.gt)
    return float(np.mean(ratio < DELTA_BASE**t))


def report_from_pair(pair: ValidPairView) -> MetricReport:
    return MetricReport(
        abs_rel=abs_rel(pair),
        sq_rel=sq_rel(pair),
        rmse=rmse(pair),
        log_rmse=log_rmse(pair),
        delta1=delta_accuracy(pair, 1),
        delta2=delta_accuracy(pair, 2),
        delta3=delta_accuracy(pair, 3),
        n_pixels=len(pair),
    )


def score_pair(gt: DepthMap, pred: DepthMap, options: ScoreOptions | None = None) -> MetricReport:
    options = options or ScoreOptions()
    pair = align_pair(gt, pred, options.median_scale, options.min_depth, options.max_depth)
    return report_from_pair(pair)


def aggregate(reports) -> MetricReport:
    """Unweighted mean of every metric across images; pixel counts summed.

    Sums use ``math.fsum`` (correctly rounded) so the result does not depend
    on the order of the reports.
    """
    reports = list(reports)
    if not reports:
        raise EmptyCorpusError("no reports to aggregate")
    n = len(reports)
    means = {name: math.fsum(getattr(r, name) for r in reports) / n for name in METRIC_FIELDS}
    return MetricReport(**means, n_pixels=sum(r.n_pixels for r in reports))


def aggregate_pooled(pairs) -> MetricReport:
    """Metrics over the union of all pixels instead of a mean of images."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpusError("no pairs to pool")
    pooled = ValidPairView(
        np.concatenate([p.gt for p in pairs]), np.concatenate([p.pred for p in pairs])
    )
    return report_from_pair(pooled)


# track -> (metric, higher_is_better)
RANK_KEYS = {1: ("abs_rel", False), 2: ("delta1", True)}


def rank_track(entries, track: int) -> list[RankedEntry]:
    """Order entries by the track's ranking metric.

    Track 1 sorts by Abs Rel ascending, track 2 by delta1 descending. Exact
    ties keep their input order and share a ``tie_group``; no further
    tie-break is applied.
    """
    entries = list(entries)
    if not entries:
        raise EmptyCorpusError("no leaderboard entries")
    if track not in RANK_KEYS:
        raise InvalidInputError(f"unknown track {track}")
    metric, higher = RANK_KEYS[track]
    keys = [getattr(e.report, metric) for e in entries]
    if any(math.isnan(k) for k in keys):
        raise InvalidInputError(f"every entry needs a {metric} value")
    order = sorted(range(len(entries)), key=lambda i: -keys[i] if higher else keys[i])
    ranked = []
    group = 0
    for pos, i in enumerate(order):
        if pos > 0 and keys[i] != keys[order[pos - 1]]:
            group += 1
        ranked.append((pos + 1, i, group))
    sizes = {}
    for _, _, g in ranked:
        sizes[g] = sizes.get(g, 0) + 1
    return [
        RankedEntry(rank=r, entry=entries[i], key=keys[i], tie_group=g, tied=sizes[g] > 1)
        for r, i, g in ranked
    ]
