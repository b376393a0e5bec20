"""End-to-end orchestration: streaming corpus scan, study execution, and
report-bundle assembly.

Post files are processed line by line; resident state is one aggregate per
(city, date) bucket, so memory stays bounded regardless of corpus size.
Aggregates merge as a commutative monoid, which lets multiple input files be
scanned in parallel worker processes and combined afterwards.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .aggregate import (
    PCT_GROUP,
    PCT_MASKED,
    PCT_MASKED_IN_GROUP,
    AggregateBuilder,
    DailyAggregate,
    bucket_counts,
    merge,
    percentage,
    raw_percentage,
)
from .errors import (
    DateRangeError,
    EmptyCohortError,
    InsufficientDataError,
    MaskwatchError,
    ZeroVarianceError,
)
from .fitscore import N_BINS
from .records import (
    CaseSeries,
    PolicyKind,
    RecordError,
    StudyConfig,
    classify_blm,
    config_to_dict,
    iter_posts,
    parse_case_series,
)
from .report import ReportBundle, Table, fmt_p, fmt_value, sha256_file, write_bundle
from .studies import (
    blm_comparison,
    correlation_study,
    policy_effect,
    trend_study,
)

_ERROR_CAP = 20

AggMap = dict[tuple[str, datetime.date], DailyAggregate]


@dataclass
class ScanResult:
    aggregates: AggMap = field(default_factory=dict)
    blm: AggMap = field(default_factory=dict)
    non_blm: AggMap = field(default_factory=dict)
    errors: list[tuple[str, RecordError]] = field(default_factory=list)
    n_lines: int = 0
    n_records: int = 0
    n_errors: int = 0
    n_window_filtered: int = 0


def _merge_maps(into: AggMap, other: AggMap) -> None:
    for key, agg in other.items():
        existing = into.get(key)
        into[key] = agg if existing is None else merge(existing, agg)


def merge_scans(results: list[ScanResult]) -> ScanResult:
    out = ScanResult()
    for r in results:
        _merge_maps(out.aggregates, r.aggregates)
        _merge_maps(out.blm, r.blm)
        _merge_maps(out.non_blm, r.non_blm)
        out.errors.extend(r.errors)
        out.n_lines += r.n_lines
        out.n_records += r.n_records
        out.n_errors += r.n_errors
        out.n_window_filtered += r.n_window_filtered
    out.errors = out.errors[:_ERROR_CAP]
    return out


def scan_posts_file(path: str | Path, cfg: StudyConfig) -> ScanResult:
    """Single pass over one JSONL posts file, reduced to daily aggregates."""
    result = ScanResult()
    known = set(cfg.city_ids)
    start, end = cfg.window
    blm_cities = set(cfg.blm_cities)
    blm_start, blm_end = cfg.blm_window
    builders: dict[tuple[str, datetime.date], AggregateBuilder] = {}
    blm_builders: dict[tuple[str, datetime.date], AggregateBuilder] = {}
    non_blm_builders: dict[tuple[str, datetime.date], AggregateBuilder] = {}
    name = str(path)
    with open(path, "r", encoding="utf-8") as f:
        for line_no, item in iter_posts(f):
            result.n_lines += 1
            if isinstance(item, RecordError):
                result.n_errors += 1
                if len(result.errors) < _ERROR_CAP:
                    result.errors.append((name, item))
                continue
            if item.city_id not in known:
                result.n_errors += 1
                if len(result.errors) < _ERROR_CAP:
                    result.errors.append(
                        (name, RecordError(line_no, f"unknown city_id {item.city_id!r}"))
                    )
                continue
            day = cfg.local_date(item.timestamp, item.city_id)
            if not start <= day <= end:
                result.n_window_filtered += 1
                continue
            result.n_records += 1
            key = (item.city_id, day)
            builder = builders.get(key)
            if builder is None:
                builder = builders[key] = AggregateBuilder(day)
            builder.add(item, cfg)
            if item.city_id in blm_cities and blm_start <= day <= blm_end:
                cohort = (
                    blm_builders
                    if classify_blm(item.tags, cfg.blm_tags)
                    else non_blm_builders
                )
                b = cohort.get(key)
                if b is None:
                    b = cohort[key] = AggregateBuilder(day)
                b.add(item, cfg)
    result.aggregates = {k: b.finish() for k, b in builders.items()}
    result.blm = {k: b.finish() for k, b in blm_builders.items()}
    result.non_blm = {k: b.finish() for k, b in non_blm_builders.items()}
    return result


def scan_posts(
    paths: list[str | Path], cfg: StudyConfig, jobs: int | None = None
) -> ScanResult:
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(paths))) as pool:
            results = list(pool.map(scan_posts_file, paths, [cfg] * len(paths)))
    else:
        results = [scan_posts_file(p, cfg) for p in paths]
    return merge_scans(results)


# --------------------------------------------------------------------------
# report assembly

_BIN_LABELS = tuple(
    "0-10" if b == 1 else f"{(b - 1) * 10}-{b * 10}" for b in range(1, N_BINS + 1)
)


def _by_city(aggmap: AggMap, cfg: StudyConfig) -> dict[str, list[DailyAggregate]]:
    out: dict[str, list[DailyAggregate]] = {c: [] for c in cfg.city_ids}
    for (city_id, _), agg in sorted(aggmap.items()):
        out[city_id].append(agg)
    return out


def _pooled_daily(aggmap: AggMap) -> list[DailyAggregate]:
    by_date: dict[datetime.date, DailyAggregate] = {}
    for (_, day), agg in aggmap.items():
        existing = by_date.get(day)
        by_date[day] = agg if existing is None else merge(existing, agg)
    return [by_date[d] for d in sorted(by_date)]


def _totals(aggregates: list[DailyAggregate]) -> dict[str, int]:
    keys = (
        "n_posts",
        "n_faces",
        "n_masked",
        "n_group_posts",
        "n_masked_posts",
        "n_celebrity_posts",
        "n_celebrity_masked_posts",
        "n_blm_posts",
    )
    out = {k: 0 for k in keys}
    for agg in aggregates:
        for k in keys:
            out[k] += getattr(agg, k)
    return out


def _fit_hist_total(aggregates: list[DailyAggregate]):
    hist = None
    for agg in aggregates:
        hist = agg.fit_hist if hist is None else hist + agg.fit_hist
    return hist


def build_report(
    cfg: StudyConfig, scan: ScanResult, cases: dict[str, CaseSeries]
) -> ReportBundle:
    bundle = ReportBundle()
    per_city = _by_city(scan.aggregates, cfg)
    window_start = cfg.window[0]

    # city summary
    rows = []
    grand = {"n_posts": 0, "n_faces": 0, "n_masked": 0}
    for city in cfg.cities:
        t = _totals(per_city[city.city_id])
        for k in grand:
            grand[k] += t[k]
        rows.append(
            (
                city.name,
                str(t["n_posts"]),
                str(t["n_faces"]),
                str(t["n_masked"]),
                fmt_value(percentage(t["n_masked"], t["n_faces"])),
            )
        )
    rows.append(
        (
            "Total",
            str(grand["n_posts"]),
            str(grand["n_faces"]),
            str(grand["n_masked"]),
            fmt_value(percentage(grand["n_masked"], grand["n_faces"])),
        )
    )
    bundle.add(
        Table(
            "city_summary",
            ("city", "posts", "faces", "masked_faces", "pct_masked_faces"),
            tuple(rows),
        )
    )

    # monthly masked percentages per city
    rows = []
    for city in cfg.cities:
        for day, num, den in bucket_counts(
            per_city[city.city_id], "month", PCT_MASKED, anchor=window_start
        ):
            rows.append(
                (
                    city.name,
                    day.isoformat(),
                    str(num),
                    str(den),
                    fmt_value(percentage(num, den)),
                )
            )
    bundle.add(
        Table(
            "monthly_pct_masked",
            ("city", "month_start", "masked_faces", "faces", "pct"),
            tuple(rows),
        )
    )

    # weekly group-picture percentages pooled over all cities
    pooled = _pooled_daily(scan.aggregates)
    rows = []
    for day, num, den in bucket_counts(pooled, "week", PCT_GROUP, anchor=window_start):
        week_no = (day - window_start).days // 7 + 1
        rows.append(
            (
                str(week_no),
                day.isoformat(),
                str(num),
                str(den),
                fmt_value(percentage(num, den)),
            )
        )
    bundle.add(
        Table(
            "weekly_pct_group",
            ("week", "week_start", "group_posts", "posts", "pct"),
            tuple(rows),
        )
    )

    # fit-score histograms
    rows = []
    for city in cfg.cities:
        hist = _fit_hist_total(per_city[city.city_id])
        if hist is None or hist.total == 0:
            continue
        for b in range(N_BINS):
            rows.append(
                (
                    city.name,
                    _BIN_LABELS[b],
                    str(hist.bins[b]),
                    str(hist.total),
                )
            )
    pooled_hist = _fit_hist_total(pooled)
    if pooled_hist is not None and pooled_hist.total > 0:
        for b in range(N_BINS):
            rows.append(
                ("All", _BIN_LABELS[b], str(pooled_hist.bins[b]), str(pooled_hist.total))
            )
    bundle.add(
        Table("fit_histogram", ("city", "fit_score_range", "count", "total"), tuple(rows))
    )

    # policy effects
    for kind, metric, table_name in (
        (PolicyKind.STAY_AT_HOME, PCT_GROUP, "policy_stay_at_home"),
        (PolicyKind.MASK_MANDATE, PCT_MASKED, "policy_mask_mandate"),
    ):
        rows = []
        for event in cfg.events(kind):
            name = cfg.city(event.city_id).name
            base = (name, event.effective_date.isoformat())
            try:
                rep = policy_effect(per_city[event.city_id], event, metric, cfg)
            except (DateRangeError, InsufficientDataError, ZeroVarianceError) as e:
                rows.append(base + ("",) * 9 + (str(e),))
                continue
            w = rep.welch
            rows.append(
                base
                + (
                    str(rep.days_before),
                    str(rep.days_after),
                    fmt_value(w.mean_before),
                    fmt_value(w.mean_after),
                    fmt_value(w.sd_before),
                    fmt_value(w.sd_after),
                    fmt_value(w.t, 3),
                    fmt_p(w.p),
                    fmt_value(rep.significant),
                    "",
                )
            )
        bundle.add(
            Table(
                table_name,
                (
                    "city",
                    "effective_date",
                    "days_before",
                    "days_after",
                    "mean_before",
                    "mean_after",
                    "sd_before",
                    "sd_after",
                    "t",
                    "p",
                    "significant",
                    "note",
                ),
                tuple(rows),
            )
        )

    # Mann-Kendall trend per city
    rows = []
    for city in cfg.cities:
        try:
            (row,) = trend_study({city.city_id: per_city[city.city_id]})
            rows.append(
                (
                    city.name,
                    str(row.n_days),
                    str(row.result.s_statistic),
                    fmt_value(row.result.variance, 1),
                    fmt_value(row.result.z, 3),
                    fmt_p(row.result.p),
                    "",
                )
            )
        except (InsufficientDataError, ZeroVarianceError) as e:
            rows.append((city.name, "", "", "", "", "", str(e)))
    bundle.add(
        Table(
            "trend_pct_masked",
            ("city", "n_days", "s", "var_s", "z", "p", "note"),
            tuple(rows),
        )
    )

    # lag-searched correlations
    rows = []
    for city in cfg.cities:
        if city.city_id not in cases:
            rows.append((city.name, "", "", "", "", "", "no case series"))
            continue
        try:
            city_rows = correlation_study(
                {city.city_id: per_city[city.city_id]},
                {city.city_id: cases[city.city_id]},
                cfg,
            )
        except (InsufficientDataError, ZeroVarianceError) as e:
            rows.append((city.name, "", "", "", "", "", str(e)))
            continue
        for cr in city_rows:
            r = cr.result
            rows.append(
                (
                    city.name,
                    r.method,
                    str(r.lag),
                    fmt_value(r.r, 4),
                    str(r.n),
                    fmt_p(r.p),
                    "",
                )
            )
    bundle.add(
        Table(
            "correlation_cases",
            ("city", "method", "max_lag", "r", "n", "p", "note"),
            tuple(rows),
        )
    )

    # BLM vs non-BLM cohort comparisons
    blm_by_city = _by_city(scan.blm, cfg)
    non_blm_by_city = _by_city(scan.non_blm, cfg)
    rows = []
    for city_id in cfg.blm_cities:
        name = cfg.city(city_id).name
        for metric in (PCT_GROUP, PCT_MASKED_IN_GROUP):
            try:
                comp = blm_comparison(
                    blm_by_city[city_id], non_blm_by_city[city_id], metric, city_id
                )
                rows.append(
                    (
                        name,
                        metric,
                        fmt_value(comp.blm_pct),
                        fmt_value(comp.non_blm_pct),
                        fmt_value(comp.difference),
                        "",
                    )
                )
            except EmptyCohortError as e:
                rows.append((name, metric, "", "", "", str(e)))
    bundle.add(
        Table(
            "blm_comparison",
            ("city", "metric", "blm_pct", "non_blm_pct", "difference_pp", "note"),
            tuple(rows),
        )
    )

    # celebrity share among masked-face posts
    rows = []
    for city in cfg.cities:
        t = _totals(per_city[city.city_id])
        rows.append(
            (
                city.name,
                str(t["n_celebrity_masked_posts"]),
                str(t["n_masked_posts"]),
                fmt_value(raw_percentage(t["n_celebrity_masked_posts"], t["n_masked_posts"])),
            )
        )
    tot = _totals(pooled)
    rows.append(
        (
            "Total",
            str(tot["n_celebrity_masked_posts"]),
            str(tot["n_masked_posts"]),
            fmt_value(raw_percentage(tot["n_celebrity_masked_posts"], tot["n_masked_posts"])),
        )
    )
    bundle.add(
        Table(
            "celebrity_share",
            ("city", "celebrity_masked_posts", "masked_posts", "share_pct"),
            tuple(rows),
        )
    )
    return bundle


def run_analyze(
    cfg: StudyConfig,
    posts_paths: list[str | Path],
    cases_path: str | Path,
    out_dir: str | Path,
    jobs: int | None = None,
) -> tuple[ReportBundle, ScanResult]:
    """Scan, study, and persist the full report bundle."""
    scan = scan_posts(list(posts_paths), cfg, jobs=jobs)
    with open(cases_path, "r", encoding="utf-8", newline="") as f:
        cases = parse_case_series(f, known_cities=cfg.city_ids)
    bundle = build_report(cfg, scan, cases)
    config_blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    bundle.metadata = {
        "tool": {"name": "maskwatch", "version": __version__},
        "config_sha256": hashlib.sha256(config_blob).hexdigest(),
        "study_window": {
            "start": cfg.window[0].isoformat(),
            "end": cfg.window[1].isoformat(),
        },
        "inputs": [
            {
                "name": Path(p).name,
                "bytes": os.path.getsize(p),
                "sha256": sha256_file(p),
            }
            for p in list(posts_paths) + [cases_path]
        ],
        "counts": {
            "lines": scan.n_lines,
            "records_in_window": scan.n_records,
            "parse_errors": scan.n_errors,
            "outside_window": scan.n_window_filtered,
        },
    }
    write_bundle(bundle, out_dir)
    return bundle, scan
