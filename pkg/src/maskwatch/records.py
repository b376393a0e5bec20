"""Canonical data model and parsers for all external inputs: detection
records (JSONL), case-count tables (CSV), and the study configuration (JSON).
"""

from __future__ import annotations

import csv
import datetime
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping

from .errors import (
    ConfigError,
    GapError,
    MonotonicityError,
    UnknownCityError,
)
from .geometry import LandmarkSet, N_LANDMARKS

UTC = datetime.timezone.utc


class MaskLabel(Enum):
    MASKED = "masked"
    UNMASKED = "unmasked"


class PolicyKind(Enum):
    STAY_AT_HOME = "stay_at_home"
    MASK_MANDATE = "mask_mandate"


@dataclass(frozen=True)
class FaceRecord:
    landmarks: LandmarkSet
    mask_label: MaskLabel
    mask_probability: float
    seg_mask_ref: str | None = None
    fit_score: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.mask_probability <= 1.0:
            raise ValueError("mask_probability outside [0, 1]")
        if self.fit_score is not None:
            if self.seg_mask_ref is None or self.mask_label is not MaskLabel.MASKED:
                raise ValueError(
                    "fit_score requires seg_mask_ref and a masked label"
                )
            if not 0.0 <= self.fit_score <= 100.0:
                raise ValueError("fit_score outside [0, 100]")

    @property
    def masked(self) -> bool:
        return self.mask_label is MaskLabel.MASKED


@dataclass(frozen=True)
class PostRecord:
    post_id: str
    city_id: str
    timestamp: datetime.datetime
    tags: frozenset[str]
    like_count: int
    faces: tuple[FaceRecord, ...] = ()

    def __post_init__(self):
        if self.like_count < 0:
            raise ValueError("like_count must be non-negative")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=UTC))
        else:
            object.__setattr__(self, "timestamp", self.timestamp.astimezone(UTC))


@dataclass(frozen=True)
class CaseSeries:
    """Gap-free, dated cumulative case counts for one city."""

    city_id: str
    entries: tuple[tuple[datetime.date, int], ...]

    def __post_init__(self):
        prev_date: datetime.date | None = None
        prev_count = -1
        for d, c in self.entries:
            if prev_date is not None:
                if d <= prev_date:
                    raise GapError(f"dates not strictly increasing at {d}")
                if d - prev_date != datetime.timedelta(days=1):
                    missing = prev_date + datetime.timedelta(days=1)
                    raise GapError(f"{self.city_id}: missing date {missing}")
                if c < prev_count:
                    raise MonotonicityError(
                        f"{self.city_id}: cumulative cases decreased at {d} "
                        f"({prev_count} -> {c})"
                    )
            if c < 0:
                raise ValueError("case counts must be non-negative")
            prev_date, prev_count = d, c

    def value_on(self, day: datetime.date) -> int | None:
        if not self.entries:
            return None
        first = self.entries[0][0]
        idx = (day - first).days
        if 0 <= idx < len(self.entries):
            return self.entries[idx][1]
        return None


@dataclass(frozen=True)
class PolicyEvent:
    city_id: str
    kind: PolicyKind
    effective_date: datetime.date


@dataclass(frozen=True)
class CityInfo:
    city_id: str
    name: str
    utc_offset_hours: float = 0.0


@dataclass(frozen=True)
class StudyConfig:
    cities: tuple[CityInfo, ...]
    window: tuple[datetime.date, datetime.date]
    policy_events: tuple[PolicyEvent, ...]
    blm_tags: frozenset[str]
    blm_window: tuple[datetime.date, datetime.date]
    blm_cities: tuple[str, ...]
    celebrity_like_threshold: int = 10000
    alpha: float = 0.01
    lag_range: tuple[int, int] = (0, 7)

    def __post_init__(self):
        ids = [c.city_id for c in self.cities]
        if not ids:
            raise ConfigError("at least one city required")
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate city ids")
        if self.window[0] >= self.window[1]:
            raise ConfigError("window start must precede end")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        lo, hi = self.lag_range
        if not (0 <= lo <= hi <= 30):
            raise ConfigError("lag_range must satisfy 0 <= min <= max <= 30")
        known = set(ids)
        for ev in self.policy_events:
            if ev.city_id not in known:
                raise ConfigError(f"policy event for unknown city {ev.city_id!r}")
        for c in self.blm_cities:
            if c not in known:
                raise ConfigError(f"BLM city {c!r} not in cities")

    @property
    def city_ids(self) -> tuple[str, ...]:
        return tuple(c.city_id for c in self.cities)

    def city(self, city_id: str) -> CityInfo:
        for c in self.cities:
            if c.city_id == city_id:
                return c
        raise KeyError(city_id)

    def local_date(self, timestamp: datetime.datetime, city_id: str) -> datetime.date:
        offset = datetime.timedelta(hours=self.city(city_id).utc_offset_hours)
        return (timestamp.astimezone(UTC) + offset).date()

    def events(self, kind: PolicyKind) -> tuple[PolicyEvent, ...]:
        return tuple(e for e in self.policy_events if e.kind is kind)

    def lags(self) -> range:
        return range(self.lag_range[0], self.lag_range[1] + 1)


def classify_blm(tags: frozenset[str], blm_tags: frozenset[str]) -> bool:
    """True iff any tag matches a protest tag exactly (tokens pre-lowercased)."""
    return bool(tags & blm_tags)


def is_celebrity(post: PostRecord, threshold: int) -> bool:
    """Strictly more likes than the threshold."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    return post.like_count > threshold


# --------------------------------------------------------------------------
# posts: one JSON object per line


@dataclass(frozen=True)
class RecordError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class _LineError(Exception):
    pass


def _parse_timestamp(raw) -> datetime.datetime:
    if not isinstance(raw, str):
        raise _LineError("timestamp must be an ISO-8601 string")
    text = raw.replace("Z", "+00:00") if raw.endswith("Z") else raw
    try:
        ts = datetime.datetime.fromisoformat(text)
    except ValueError:
        raise _LineError(f"bad timestamp {raw!r}") from None
    return ts if ts.tzinfo else ts.replace(tzinfo=UTC)


def _parse_face(obj, idx: int) -> FaceRecord:
    if not isinstance(obj, dict):
        raise _LineError(f"face {idx}: not an object")
    lm = obj.get("landmarks")
    if not isinstance(lm, list):
        raise _LineError(f"face {idx}: missing landmarks")
    if len(lm) != N_LANDMARKS:
        raise _LineError(f"face {idx}: landmark count {len(lm)} != {N_LANDMARKS}")
    points = []
    for pair in lm:
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) for v in pair)
        ):
            raise _LineError(f"face {idx}: landmark entries must be [x, y] pairs")
        x, y = float(pair[0]), float(pair[1])
        if not (math.isfinite(x) and math.isfinite(y)) or x < 0 or y < 0:
            raise _LineError(f"face {idx}: landmark coordinates must be finite and >= 0")
        points.append((x, y))
    label_raw = obj.get("mask_label")
    try:
        label = MaskLabel(label_raw)
    except ValueError:
        raise _LineError(f"face {idx}: bad mask_label {label_raw!r}") from None
    prob = obj.get("mask_probability")
    if not isinstance(prob, (int, float)) or not 0.0 <= prob <= 1.0:
        raise _LineError(f"face {idx}: mask_probability {prob!r} outside [0, 1]")
    seg = obj.get("seg_mask")
    if seg is not None and not isinstance(seg, str):
        raise _LineError(f"face {idx}: seg_mask must be a path string")
    score = obj.get("fit_score")
    if score is not None:
        if not isinstance(score, (int, float)) or not 0.0 <= score <= 100.0:
            raise _LineError(f"face {idx}: fit_score {score!r} outside [0, 100]")
        if seg is None or label is not MaskLabel.MASKED:
            raise _LineError(
                f"face {idx}: fit_score requires seg_mask and a masked label"
            )
        score = float(score)
    return FaceRecord(
        landmarks=LandmarkSet(tuple(points)),
        mask_label=label,
        mask_probability=float(prob),
        seg_mask_ref=seg,
        fit_score=score,
    )


def parse_post_line(line: str) -> PostRecord:
    """Parse one JSONL post record; raises _LineError on any defect."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise _LineError(f"malformed JSON: {e.msg}") from None
    if not isinstance(obj, dict):
        raise _LineError("record must be a JSON object")
    post_id = obj.get("post_id")
    if not isinstance(post_id, str) or not post_id:
        raise _LineError("missing post_id")
    city_id = obj.get("city_id")
    if not isinstance(city_id, str) or not city_id:
        raise _LineError("missing city_id")
    ts = _parse_timestamp(obj.get("timestamp"))
    tags_raw = obj.get("tags")
    if not isinstance(tags_raw, list) or not all(isinstance(t, str) for t in tags_raw):
        raise _LineError("tags must be an array of strings")
    like = obj.get("like_count")
    if not isinstance(like, int) or isinstance(like, bool) or like < 0:
        raise _LineError(f"like_count {like!r} must be a non-negative integer")
    faces_raw = obj.get("faces")
    if not isinstance(faces_raw, list):
        raise _LineError("faces must be an array")
    faces = tuple(_parse_face(f, i) for i, f in enumerate(faces_raw))
    return PostRecord(
        post_id=post_id,
        city_id=city_id,
        timestamp=ts,
        tags=frozenset(t.lower() for t in tags_raw),
        like_count=like,
        faces=faces,
    )


def iter_posts(
    lines: Iterable[str],
) -> Iterator[tuple[int, PostRecord | RecordError]]:
    """Stream parse: yields (line_no, record) or (line_no, error) per line.

    Never aborts on malformed input; every input line yields exactly one
    outcome.
    """
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            yield line_no, RecordError(line_no, "empty line")
            continue
        try:
            yield line_no, parse_post_line(stripped)
        except _LineError as e:
            yield line_no, RecordError(line_no, str(e))
        except (ValueError, TypeError) as e:
            yield line_no, RecordError(line_no, str(e))


def parse_posts(
    lines: Iterable[str],
) -> tuple[list[PostRecord], list[RecordError]]:
    records: list[PostRecord] = []
    errors: list[RecordError] = []
    for _, item in iter_posts(lines):
        if isinstance(item, RecordError):
            errors.append(item)
        else:
            records.append(item)
    return records, errors


def serialize_post(post: PostRecord) -> str:
    """Canonical one-line JSON form; parse(serialize(p)) == p."""
    faces = []
    for f in post.faces:
        obj: dict = {
            "landmarks": [[x, y] for x, y in f.landmarks.points],
            "mask_label": f.mask_label.value,
            "mask_probability": f.mask_probability,
        }
        if f.seg_mask_ref is not None:
            obj["seg_mask"] = f.seg_mask_ref
        if f.fit_score is not None:
            obj["fit_score"] = f.fit_score
        faces.append(obj)
    doc = {
        "post_id": post.post_id,
        "city_id": post.city_id,
        "timestamp": post.timestamp.isoformat(),
        "tags": sorted(post.tags),
        "like_count": post.like_count,
        "faces": faces,
    }
    return json.dumps(doc, separators=(",", ":"))


# --------------------------------------------------------------------------
# cases: CSV with header date,city_id,cumulative_cases

_CASES_HEADER = ["date", "city_id", "cumulative_cases"]


def parse_case_series(
    rows: Iterable[str], known_cities: Iterable[str] | None = None
) -> dict[str, CaseSeries]:
    """Parse the case-count CSV into one gap-free series per city."""
    known = set(known_cities) if known_cities is not None else None
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != _CASES_HEADER:
        raise GapError(f"expected header {','.join(_CASES_HEADER)!r}, got {header}")
    per_city: dict[str, list[tuple[datetime.date, int]]] = {}
    for row_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise GapError(f"row {row_no}: expected 3 columns, got {len(row)}")
        raw_date, city_id, raw_count = (c.strip() for c in row)
        try:
            day = datetime.date.fromisoformat(raw_date)
        except ValueError:
            raise GapError(f"row {row_no}: bad date {raw_date!r}") from None
        if known is not None and city_id not in known:
            raise UnknownCityError(f"row {row_no}: unknown city_id {city_id!r}")
        try:
            count = int(raw_count)
        except ValueError:
            raise GapError(f"row {row_no}: bad count {raw_count!r}") from None
        per_city.setdefault(city_id, []).append((day, count))
    out: dict[str, CaseSeries] = {}
    for city_id, entries in per_city.items():
        entries.sort(key=lambda e: e[0])
        out[city_id] = CaseSeries(city_id, tuple(entries))
    return out


# --------------------------------------------------------------------------
# study configuration

_DEFAULT_CITIES = (
    ("new_york_city", "New York City"),
    ("dallas", "Dallas"),
    ("seattle", "Seattle"),
    ("minneapolis", "Minneapolis"),
    ("new_orleans", "New Orleans"),
    ("boston", "Boston"),
)

_DEFAULT_STAY_AT_HOME = {
    "boston": "2020-03-23",
    "minneapolis": "2020-03-27",
    "new_orleans": "2020-03-20",
    "dallas": "2020-03-23",
    "seattle": "2020-03-23",
    "new_york_city": "2020-03-20",
}

_DEFAULT_MASK_MANDATE = {
    "boston": "2020-05-06",
    "minneapolis": "2020-04-30",
    "new_york_city": "2020-04-15",
}

_DEFAULT_BLM_TAGS = (
    "blm",
    "blacklivesmatter",
    "georgefloyd",
    "justiceforgeorgefloyd",
    "policebrutality",
    "protest",
)


def default_study_config() -> StudyConfig:
    """Six-city 2020 study defaults (cities, windows, policy dates, tags)."""
    events = [
        PolicyEvent(c, PolicyKind.STAY_AT_HOME, datetime.date.fromisoformat(d))
        for c, d in _DEFAULT_STAY_AT_HOME.items()
    ] + [
        PolicyEvent(c, PolicyKind.MASK_MANDATE, datetime.date.fromisoformat(d))
        for c, d in _DEFAULT_MASK_MANDATE.items()
    ]
    return StudyConfig(
        cities=tuple(CityInfo(cid, name) for cid, name in _DEFAULT_CITIES),
        window=(datetime.date(2020, 2, 1), datetime.date(2020, 5, 31)),
        policy_events=tuple(events),
        blm_tags=frozenset(_DEFAULT_BLM_TAGS),
        blm_window=(datetime.date(2020, 5, 25), datetime.date(2020, 7, 15)),
        blm_cities=("new_york_city", "minneapolis"),
        celebrity_like_threshold=10000,
        alpha=0.01,
        lag_range=(0, 7),
    )


def config_from_dict(doc: Mapping) -> StudyConfig:
    try:
        cities = tuple(
            CityInfo(
                c["id"], c.get("name", c["id"]), float(c.get("utc_offset_hours", 0.0))
            )
            for c in doc["cities"]
        )
        window = (
            datetime.date.fromisoformat(doc["window"]["start"]),
            datetime.date.fromisoformat(doc["window"]["end"]),
        )
        events = tuple(
            PolicyEvent(
                e["city_id"],
                PolicyKind(e["kind"]),
                datetime.date.fromisoformat(e["date"]),
            )
            for e in doc.get("policy_events", ())
        )
        blm_window_doc = doc.get("blm_window", {})
        blm_window = (
            datetime.date.fromisoformat(blm_window_doc.get("start", "2020-05-25")),
            datetime.date.fromisoformat(blm_window_doc.get("end", "2020-07-15")),
        )
        return StudyConfig(
            cities=cities,
            window=window,
            policy_events=events,
            blm_tags=frozenset(t.lower() for t in doc.get("blm_tags", ())),
            blm_window=blm_window,
            blm_cities=tuple(doc.get("blm_cities", ())),
            celebrity_like_threshold=int(doc.get("celebrity_like_threshold", 10000)),
            alpha=float(doc.get("alpha", 0.01)),
            lag_range=tuple(doc.get("lag_range", (0, 7))),  # type: ignore[arg-type]
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad config: {e}") from None


def config_to_dict(cfg: StudyConfig) -> dict:
    return {
        "cities": [
            {"id": c.city_id, "name": c.name, "utc_offset_hours": c.utc_offset_hours}
            for c in cfg.cities
        ],
        "window": {
            "start": cfg.window[0].isoformat(),
            "end": cfg.window[1].isoformat(),
        },
        "policy_events": [
            {
                "city_id": e.city_id,
                "kind": e.kind.value,
                "date": e.effective_date.isoformat(),
            }
            for e in cfg.policy_events
        ],
        "blm_tags": sorted(cfg.blm_tags),
        "blm_window": {
            "start": cfg.blm_window[0].isoformat(),
            "end": cfg.blm_window[1].isoformat(),
        },
        "blm_cities": list(cfg.blm_cities),
        "celebrity_like_threshold": cfg.celebrity_like_threshold,
        "alpha": cfg.alpha,
        "lag_range": list(cfg.lag_range),
    }


def load_config(path) -> StudyConfig:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e.msg})") from None
    return config_from_dict(doc)
