"""Composed studies: policy before/after effects, per-city trend tests,
lag-searched case correlations, and BLM cohort comparisons.

Days with an undefined daily percentage (zero denominator) are dropped from
test inputs, never imputed as zero.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from typing import Mapping, Sequence

from .aggregate import (
    DailyAggregate,
    MetricSeries,
    daily_series,
    raw_percentage,
)
from .errors import DateRangeError, EmptyCohortError, InsufficientDataError
from .records import CaseSeries, PolicyEvent, StudyConfig
from .stats import (
    PEARSON,
    SPEARMAN,
    CorrelationResult,
    TrendResult,
    WelchResult,
    lag_max_correlation,
    mann_kendall,
    welch,
)


@dataclass(frozen=True)
class PolicyEffectReport:
    city_id: str
    event: PolicyEvent
    metric_kind: str
    days_before: int
    days_after: int
    mean_before: float
    mean_after: float
    welch: WelchResult
    significant: bool


@dataclass(frozen=True)
class TrendRow:
    city_id: str
    n_days: int
    result: TrendResult


@dataclass(frozen=True)
class CorrelationRow:
    city_id: str
    result: CorrelationResult


@dataclass(frozen=True)
class CohortComparison:
    city_id: str
    metric_kind: str
    blm_pct: float
    non_blm_pct: float
    difference: float


def split_before_after(
    series: MetricSeries, event: PolicyEvent
) -> tuple[MetricSeries, MetricSeries]:
    """Partition a daily series at the event: days strictly before the
    effective date on one side, the effective date and later on the other."""
    if not series.points:
        raise DateRangeError("empty series")
    first, last = series.points[0][0], series.points[-1][0]
    eff = event.effective_date
    if not first <= eff <= last:
        raise DateRangeError(
            f"event date {eff} outside series span {first}..{last}"
        )
    before = tuple(p for p in series.points if p[0] < eff)
    after = tuple(p for p in series.points if p[0] >= eff)
    return (
        MetricSeries(series.city_id, series.kind, before),
        MetricSeries(series.city_id, series.kind, after),
    )


def policy_effect(
    aggregates: Sequence[DailyAggregate],
    event: PolicyEvent,
    metric_kind: str,
    cfg: StudyConfig,
) -> PolicyEffectReport:
    """Welch's t-test on the daily percentage series split at the event."""
    start, end = cfg.window
    eff = event.effective_date
    if not start <= eff <= end:
        raise DateRangeError(f"event date {eff} outside study window")
    series = daily_series(aggregates, metric_kind, event.city_id)
    before_s, after_s = split_before_after(series, event)
    before_vals = before_s.values()
    after_vals = after_s.values()
    if len(before_vals) < 2 or len(after_vals) < 2:
        raise InsufficientDataError(
            f"{event.city_id} {event.kind.value}: need >= 2 defined days per side "
            f"(got {len(before_vals)}/{len(after_vals)})"
        )
    result = welch(before_vals, after_vals)
    return PolicyEffectReport(
        city_id=event.city_id,
        event=event,
        metric_kind=metric_kind,
        days_before=(eff - start).days,
        days_after=(end - eff).days + 1,
        mean_before=result.mean_before,
        mean_after=result.mean_after,
        welch=result,
        significant=result.p < cfg.alpha,
    )


def trend_study(
    aggregates_by_city: Mapping[str, Sequence[DailyAggregate]],
    metric_kind: str = "pct_masked",
) -> list[TrendRow]:
    """Mann-Kendall trend test on each city's daily percentage series."""
    rows = []
    for city_id, aggregates in aggregates_by_city.items():
        values = daily_series(aggregates, metric_kind, city_id).values()
        rows.append(TrendRow(city_id, len(values), mann_kendall(values)))
    return rows


def correlation_study(
    aggregates_by_city: Mapping[str, Sequence[DailyAggregate]],
    cases_by_city: Mapping[str, CaseSeries],
    cfg: StudyConfig,
    metric_kind: str = "pct_masked",
) -> list[CorrelationRow]:
    """Lag-searched Pearson and Spearman correlations of each city's daily
    masked percentage against its cumulative case counts."""
    rows = []
    for city_id, aggregates in aggregates_by_city.items():
        cases = cases_by_city.get(city_id)
        if cases is None:
            continue
        series = daily_series(aggregates, metric_kind, city_id)
        for method in (PEARSON, SPEARMAN):
            result = lag_max_correlation(cases, series, cfg.lags(), method)
            rows.append(CorrelationRow(city_id, result))
    return rows


def blm_comparison(
    blm_aggregates: Sequence[DailyAggregate],
    non_blm_aggregates: Sequence[DailyAggregate],
    metric_kind: str,
    city_id: str = "",
) -> CohortComparison:
    """Pooled-percentage difference (blm minus non-blm) for one metric."""

    def pooled(aggregates: Sequence[DailyAggregate], name: str) -> float:
        num = 0
        den = 0
        for agg in aggregates:
            n, d = agg.numerator_denominator(metric_kind)
            num += n
            den += d
        value = raw_percentage(num, den)
        if value is None:
            raise EmptyCohortError(
                f"{city_id}: {name} cohort has no {metric_kind} denominator"
            )
        return value

    blm_pct = pooled(blm_aggregates, "blm")
    non_blm_pct = pooled(non_blm_aggregates, "non_blm")
    return CohortComparison(
        city_id=city_id,
        metric_kind=metric_kind,
        blm_pct=blm_pct,
        non_blm_pct=non_blm_pct,
        difference=blm_pct - non_blm_pct,
    )
