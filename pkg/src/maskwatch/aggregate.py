"""Time-bucketed adherence aggregates.

DailyAggregate is a commutative monoid under ``merge``: reduction over posts
may be partitioned arbitrarily by (city, date) and merged afterwards.
Percentages for reporting round half-up to 2 decimals; series values used in
statistical tests keep full precision.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

from .errors import MergeError
from .fitscore import FitHistogram, N_BINS, score_bin
from .records import PostRecord, StudyConfig, classify_blm, is_celebrity

PCT_MASKED = "pct_masked"
PCT_GROUP = "pct_group"
PCT_MASKED_IN_GROUP = "pct_masked_in_group"

METRIC_KINDS = (PCT_MASKED, PCT_GROUP, PCT_MASKED_IN_GROUP)


@dataclass(frozen=True)
class DailyAggregate:
    date: datetime.date
    n_posts: int = 0
    n_faces: int = 0
    n_masked: int = 0
    n_group_posts: int = 0
    n_faces_in_groups: int = 0
    n_masked_in_groups: int = 0
    n_masked_posts: int = 0
    n_celebrity_posts: int = 0
    n_celebrity_masked_posts: int = 0
    n_blm_posts: int = 0
    fit_hist: FitHistogram = FitHistogram()

    def __post_init__(self):
        c = self
        counts = (
            c.n_posts,
            c.n_faces,
            c.n_masked,
            c.n_group_posts,
            c.n_faces_in_groups,
            c.n_masked_in_groups,
            c.n_masked_posts,
            c.n_celebrity_posts,
            c.n_celebrity_masked_posts,
            c.n_blm_posts,
        )
        if any(v < 0 for v in counts):
            raise ValueError("counts must be non-negative")
        if c.n_masked > c.n_faces or c.n_faces_in_groups > c.n_faces:
            raise ValueError("face counts inconsistent")
        if c.n_group_posts > c.n_posts or c.n_masked_posts > c.n_posts:
            raise ValueError("post counts inconsistent")
        if c.n_masked_in_groups > min(c.n_masked, c.n_faces_in_groups):
            raise ValueError("masked-in-group count inconsistent")
        if c.n_celebrity_masked_posts > min(c.n_celebrity_posts, c.n_masked_posts):
            raise ValueError("celebrity counts inconsistent")

    def numerator_denominator(self, kind: str) -> tuple[int, int]:
        if kind == PCT_MASKED:
            return self.n_masked, self.n_faces
        if kind == PCT_GROUP:
            return self.n_group_posts, self.n_posts
        if kind == PCT_MASKED_IN_GROUP:
            return self.n_masked_in_groups, self.n_faces_in_groups
        raise ValueError(f"unknown metric kind {kind!r}")


class AggregateBuilder:
    """Mutable accumulator for one (city, date) bucket."""

    __slots__ = (
        "date",
        "n_posts",
        "n_faces",
        "n_masked",
        "n_group_posts",
        "n_faces_in_groups",
        "n_masked_in_groups",
        "n_masked_posts",
        "n_celebrity_posts",
        "n_celebrity_masked_posts",
        "n_blm_posts",
        "bins",
    )

    def __init__(self, date: datetime.date):
        self.date = date
        self.n_posts = 0
        self.n_faces = 0
        self.n_masked = 0
        self.n_group_posts = 0
        self.n_faces_in_groups = 0
        self.n_masked_in_groups = 0
        self.n_masked_posts = 0
        self.n_celebrity_posts = 0
        self.n_celebrity_masked_posts = 0
        self.n_blm_posts = 0
        self.bins = [0] * N_BINS

    def add(self, post: PostRecord, cfg: StudyConfig) -> None:
        self.n_posts += 1
        faces = post.faces
        n_faces = len(faces)
        n_masked = sum(1 for f in faces if f.masked)
        self.n_faces += n_faces
        self.n_masked += n_masked
        group = n_faces >= 2
        if group:
            self.n_group_posts += 1
            self.n_faces_in_groups += n_faces
            self.n_masked_in_groups += n_masked
        has_masked = n_masked > 0
        if has_masked:
            self.n_masked_posts += 1
        if is_celebrity(post, cfg.celebrity_like_threshold):
            self.n_celebrity_posts += 1
            if has_masked:
                self.n_celebrity_masked_posts += 1
        if classify_blm(post.tags, cfg.blm_tags):
            self.n_blm_posts += 1
        for f in faces:
            if f.fit_score is not None:
                self.bins[score_bin(f.fit_score) - 1] += 1

    def finish(self) -> DailyAggregate:
        return DailyAggregate(
            date=self.date,
            n_posts=self.n_posts,
            n_faces=self.n_faces,
            n_masked=self.n_masked,
            n_group_posts=self.n_group_posts,
            n_faces_in_groups=self.n_faces_in_groups,
            n_masked_in_groups=self.n_masked_in_groups,
            n_masked_posts=self.n_masked_posts,
            n_celebrity_posts=self.n_celebrity_posts,
            n_celebrity_masked_posts=self.n_celebrity_masked_posts,
            n_blm_posts=self.n_blm_posts,
            fit_hist=FitHistogram(tuple(self.bins), sum(self.bins)),
        )


def aggregate_day(
    day: datetime.date, posts: Iterable[PostRecord], cfg: StudyConfig
) -> DailyAggregate:
    """Aggregate one day's posts. A group post has >= 2 detected faces."""
    builder = AggregateBuilder(day)
    for post in posts:
        if cfg.local_date(post.timestamp, post.city_id) != day:
            raise ValueError(f"post {post.post_id} not on {day}")
        builder.add(post, cfg)
    return builder.finish()


def zero_aggregate(day: datetime.date) -> DailyAggregate:
    return DailyAggregate(date=day)


def merge(a: DailyAggregate, b: DailyAggregate) -> DailyAggregate:
    """Fieldwise sum of two same-date aggregates."""
    if a.date != b.date:
        raise MergeError(f"cannot merge aggregates for {a.date} and {b.date}")
    return DailyAggregate(
        date=a.date,
        n_posts=a.n_posts + b.n_posts,
        n_faces=a.n_faces + b.n_faces,
        n_masked=a.n_masked + b.n_masked,
        n_group_posts=a.n_group_posts + b.n_group_posts,
        n_faces_in_groups=a.n_faces_in_groups + b.n_faces_in_groups,
        n_masked_in_groups=a.n_masked_in_groups + b.n_masked_in_groups,
        n_masked_posts=a.n_masked_posts + b.n_masked_posts,
        n_celebrity_posts=a.n_celebrity_posts + b.n_celebrity_posts,
        n_celebrity_masked_posts=a.n_celebrity_masked_posts
        + b.n_celebrity_masked_posts,
        n_blm_posts=a.n_blm_posts + b.n_blm_posts,
        fit_hist=a.fit_hist + b.fit_hist,
    )


def percentage(numerator: int, denominator: int) -> float | None:
    """Reporting percentage: 100*n/d rounded half-up to 2 decimals; None when
    the denominator is zero."""
    if numerator < 0 or denominator < 0:
        raise ValueError("counts must be non-negative")
    if denominator == 0:
        return None
    q = (Decimal(numerator) * 100 / Decimal(denominator)).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP
    )
    return float(q)


def raw_percentage(numerator: int, denominator: int) -> float | None:
    """Full-precision percentage for internal series; None when undefined."""
    if denominator == 0:
        return None
    return 100.0 * numerator / denominator


@dataclass(frozen=True)
class MetricSeries:
    city_id: str
    kind: str
    points: tuple[tuple[datetime.date, float | None], ...]

    def __post_init__(self):
        prev = None
        for d, v in self.points:
            if prev is not None and d <= prev:
                raise ValueError("series dates must be strictly increasing")
            if v is not None and not 0.0 <= v <= 100.0:
                raise ValueError(f"percentage {v} outside [0, 100]")
            prev = d

    def defined(self) -> list[tuple[datetime.date, float]]:
        return [(d, v) for d, v in self.points if v is not None]

    def values(self) -> list[float]:
        return [v for _, v in self.points if v is not None]


def _check_sorted(aggregates: Sequence[DailyAggregate]) -> None:
    for prev, cur in zip(aggregates, aggregates[1:]):
        if cur.date <= prev.date:
            raise ValueError("aggregates must be sorted by strictly increasing date")


def bucket_counts(
    aggregates: Sequence[DailyAggregate],
    period: str,
    kind: str,
    anchor: datetime.date | None = None,
) -> list[tuple[datetime.date, int, int]]:
    """Per-bucket (start date, numerator, denominator) sums.

    Weeks are consecutive 7-day blocks anchored at ``anchor`` (default: the
    first aggregate's date); months are calendar months.
    """
    if period not in ("day", "week", "month"):
        raise ValueError(f"unknown period {period!r}")
    if not aggregates:
        return []
    _check_sorted(aggregates)
    start = anchor if anchor is not None else aggregates[0].date

    def bucket_key(d: datetime.date) -> datetime.date:
        if period == "day":
            return d
        if period == "week":
            return start + datetime.timedelta(days=7 * ((d - start).days // 7))
        return datetime.date(d.year, d.month, 1)

    sums: dict[datetime.date, tuple[int, int]] = {}
    for agg in aggregates:
        num, den = agg.numerator_denominator(kind)
        key = bucket_key(agg.date)
        n0, d0 = sums.get(key, (0, 0))
        sums[key] = (n0 + num, d0 + den)
    return [(key, *sums[key]) for key in sorted(sums.keys())]


def bucket_series(
    aggregates: Sequence[DailyAggregate],
    period: str,
    kind: str,
    city_id: str = "",
    anchor: datetime.date | None = None,
) -> MetricSeries:
    """Bucketed percentage series; values keep full precision, buckets with a
    zero denominator yield None."""
    points = tuple(
        (day, raw_percentage(num, den))
        for day, num, den in bucket_counts(aggregates, period, kind, anchor)
    )
    return MetricSeries(city_id, kind, points)


def daily_series(
    aggregates: Sequence[DailyAggregate], kind: str, city_id: str = ""
) -> MetricSeries:
    return bucket_series(aggregates, "day", kind, city_id)


def celebrity_share(aggregates: Iterable[DailyAggregate]) -> float | None:
    """Share of masked-face posts attributable to celebrity accounts.

    100 x (celebrity posts with >= 1 masked face) / (posts with >= 1 masked
    face); None when no post contains a masked face.
    """
    num = 0
    den = 0
    for agg in aggregates:
        num += agg.n_celebrity_masked_posts
        den += agg.n_masked_posts
    return raw_percentage(num, den)
