"""Deterministic synthetic-corpus generator with planted ground truth.

Randomness comes exclusively from numpy's Philox counter-based generator,
keyed per (city, day) through a splitmix64 chain, so corpora are reproducible
bit-for-bit across platforms and may be generated in any order.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .geometry import LandmarkSet
from .records import (
    CaseSeries,
    FaceRecord,
    MaskLabel,
    PolicyKind,
    PostRecord,
    StudyConfig,
    UTC,
    default_study_config,
)

_M64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def derive_seed(root: int, *parts: int | str) -> int:
    """Stable 64-bit substream seed from a root seed and mixed-type parts."""
    h = root & _M64
    for part in parts:
        if isinstance(part, str):
            for b in part.encode("utf-8"):
                h = _splitmix64(h ^ b)
        else:
            h = _splitmix64(h ^ (int(part) & _M64))
    return h


def _rng(root: int, *parts: int | str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_seed(root, *parts)))


# --------------------------------------------------------------------------
# canonical 68-point frontal-face template (200x200 pixel space)


def _build_template() -> tuple[tuple[float, float], ...]:
    pts: list[tuple[float, float]] = []
    # 1-17: jawline arc, left temple -> chin -> right temple
    for k in range(17):
        theta = math.pi - k * math.pi / 16.0
        pts.append((100.0 + 72.0 * math.cos(theta), 85.0 + 100.0 * math.sin(theta)))
    # 18-22 / 23-27: eyebrows
    for k in range(5):
        pts.append((40.0 + 10.0 * k, 62.0 - 3.0 * math.sin(k * math.pi / 4)))
    for k in range(5):
        pts.append((120.0 + 10.0 * k, 62.0 - 3.0 * math.sin((4 - k) * math.pi / 4)))
    # 28-31: nose bridge
    for k in range(4):
        pts.append((100.0, 78.0 + 12.0 * k))
    # 32-36: nose bottom
    for k, dx in enumerate((-18.0, -9.0, 0.0, 9.0, 18.0)):
        pts.append((100.0 + dx, 126.0 + (3.0 if k in (1, 3) else 5.0 if k == 2 else 0.0)))
    # 37-42 / 43-48: eyes (hexagons)
    for cx in (65.0, 135.0):
        for k in range(6):
            theta = k * math.pi / 3.0
            pts.append((cx + 12.0 * math.cos(theta), 80.0 + 6.0 * math.sin(theta)))
    # 49-60: outer lip ellipse
    for k in range(12):
        theta = k * math.pi / 6.0
        pts.append((100.0 + 28.0 * math.cos(theta), 155.0 + 14.0 * math.sin(theta)))
    # 61-68: inner lip ellipse
    for k in range(8):
        theta = k * math.pi / 4.0
        pts.append((100.0 + 18.0 * math.cos(theta), 155.0 + 7.0 * math.sin(theta)))
    return tuple(pts)


CANONICAL_LANDMARK_POINTS = _build_template()
CANONICAL_LANDMARKS = LandmarkSet(CANONICAL_LANDMARK_POINTS)


def generate_landmarks(rng: np.random.Generator, jitter: float = 0.0) -> LandmarkSet:
    """Affine-perturbed copy of the canonical template.

    jitter = 0 returns the exact template; jitter must stay below ~1 so the
    nose-mouth hull cannot degenerate.
    """
    if jitter == 0.0:
        return CANONICAL_LANDMARKS
    if not 0.0 <= jitter < 1.0:
        raise ValueError("jitter must lie in [0, 1)")
    pts = np.asarray(CANONICAL_LANDMARK_POINTS)
    center = pts.mean(axis=0)
    scale = 1.0 + 0.3 * jitter * (2.0 * rng.random() - 1.0)
    angle = 0.25 * jitter * (2.0 * rng.random() - 1.0)
    shift = 10.0 * jitter * (2.0 * rng.random(2) - 1.0)
    rot = np.array(
        [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
    )
    noise = jitter * rng.normal(0.0, 1.0, size=pts.shape)
    out = (pts - center) @ (scale * rot.T) + center + shift + noise
    out = np.maximum(out, 0.0)
    return LandmarkSet(tuple((float(x), float(y)) for x, y in out))


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class CityParams:
    """Planted per-city generation parameters.

    Rates are fractions in [0, 1]; *_pp values are percentage points. The
    stay-at-home step applies to the group-post rate, the mask-mandate step
    to the per-face mask rate. When ``case_lag_days`` is set, the mask rate
    additionally swings by ``case_coupling_pp`` with the min-max-normalized
    cumulative case count lagged by that many days.
    """

    posts_per_day: int = 200
    base_mask_rate: float = 0.12
    daily_trend_pp: float = 0.05
    group_post_rate: float = 0.13
    policy_effect_pp: float = -3.0
    mask_mandate_effect_pp: float = 0.0
    single_face_rate: float = 0.30
    group_extra_faces_mean: float = 1.2
    like_median: float = 120.0
    like_sigma: float = 1.1
    celebrity_rate: float = 0.002
    fit_high_share: float = 0.5
    fit_sharpness: float = 2.5
    seg_ref_rate: float = 1.0
    blm_share: float = 0.0
    blm_group_boost_pp: float = 0.0
    blm_mask_boost_pp: float = 0.0
    landmark_jitter: float = 0.0
    case_start: int = 5
    case_daily_base: float = 40.0
    case_burst_rate: float = 0.15
    case_burst_mean: float = 900.0
    case_lag_days: int | None = None
    case_coupling_pp: float = 0.0


@dataclass(frozen=True)
class SynthParams:
    seed: int = 20200201
    cities: dict[str, CityParams] = field(default_factory=dict)

    def for_city(self, city_id: str) -> CityParams:
        return self.cities.get(city_id, CityParams())


def default_synth_params(cfg: StudyConfig | None = None) -> SynthParams:
    cfg = cfg or default_study_config()
    return SynthParams(cities={c: CityParams() for c in cfg.city_ids})


_FILLER_TAGS = (
    "city",
    "food",
    "friends",
    "spring",
    "sunday",
    "walk",
    "coffee",
    "skyline",
)


def _clamp01(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


class SynthCorpus:
    """Deterministic corpus handle: post stream, case series, manifest."""

    def __init__(self, params: SynthParams, cfg: StudyConfig):
        self.params = params
        self.cfg = cfg
        start, end = cfg.window
        self.days = [
            start + datetime.timedelta(days=i)
            for i in range((end - start).days + 1)
        ]
        self._events = {
            (e.city_id, e.kind): e.effective_date for e in cfg.policy_events
        }
        self.case_series: dict[str, CaseSeries] = {}
        self._norm_cases: dict[str, dict[datetime.date, float]] = {}
        self._rates: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.manifest: dict = {
            "seed": params.seed,
            "window": {"start": start.isoformat(), "end": end.isoformat()},
            "days": len(self.days),
            "cities": {},
        }
        for city_id in cfg.city_ids:
            self._prepare_city(city_id)

    def _prepare_city(self, city_id: str) -> None:
        p = self.params.for_city(city_id)
        start, end = self.cfg.window
        lag_buffer = self.cfg.lag_range[1]
        case_start_day = start - datetime.timedelta(days=lag_buffer)
        n_case_days = (end - case_start_day).days + 1
        rng = _rng(self.params.seed, city_id, "cases")
        increments = rng.poisson(p.case_daily_base, n_case_days)
        bursts = rng.random(n_case_days) < p.case_burst_rate
        increments = increments + np.where(
            bursts, rng.poisson(p.case_burst_mean, n_case_days), 0
        )
        cumulative = p.case_start + np.cumsum(increments)
        dates = [case_start_day + datetime.timedelta(days=i) for i in range(n_case_days)]
        self.case_series[city_id] = CaseSeries(
            city_id, tuple((d, int(c)) for d, c in zip(dates, cumulative))
        )
        lo, hi = float(cumulative.min()), float(cumulative.max())
        span = hi - lo
        self._norm_cases[city_id] = {
            d: ((float(c) - lo) / span if span > 0 else 0.0)
            for d, c in zip(dates, cumulative)
        }

        t = np.arange(len(self.days), dtype=np.float64)
        mask_rate = p.base_mask_rate + p.daily_trend_pp / 100.0 * t
        if p.case_lag_days is not None and p.case_coupling_pp != 0.0:
            shift = datetime.timedelta(days=p.case_lag_days)
            norm = self._norm_cases[city_id]
            coupled = np.array([norm.get(d - shift, 0.0) for d in self.days])
            mask_rate = mask_rate + p.case_coupling_pp / 100.0 * coupled
        mandate = self._events.get((city_id, PolicyKind.MASK_MANDATE))
        if mandate is not None and p.mask_mandate_effect_pp != 0.0:
            stepped = np.array([d >= mandate for d in self.days])
            mask_rate = mask_rate + p.mask_mandate_effect_pp / 100.0 * stepped
        group_rate = np.full(len(self.days), p.group_post_rate)
        stay = self._events.get((city_id, PolicyKind.STAY_AT_HOME))
        if stay is not None and p.policy_effect_pp != 0.0:
            stepped = np.array([d >= stay for d in self.days])
            group_rate = group_rate + p.policy_effect_pp / 100.0 * stepped
        clamped_days = int(
            np.count_nonzero((mask_rate < 0) | (mask_rate > 1))
            + np.count_nonzero((group_rate < 0) | (group_rate > 1))
        )
        self._rates[city_id] = (_clamp01(mask_rate), _clamp01(group_rate))
        self.manifest["cities"][city_id] = {
            "posts_per_day": p.posts_per_day,
            "base_mask_rate": p.base_mask_rate,
            "daily_trend_pp": p.daily_trend_pp,
            "group_post_rate": p.group_post_rate,
            "policy_effect_pp": p.policy_effect_pp,
            "mask_mandate_effect_pp": p.mask_mandate_effect_pp,
            "stay_at_home_date": stay.isoformat() if stay else None,
            "mask_mandate_date": mandate.isoformat() if mandate else None,
            "celebrity_rate": p.celebrity_rate,
            "blm_share": p.blm_share,
            "blm_group_boost_pp": p.blm_group_boost_pp,
            "blm_mask_boost_pp": p.blm_mask_boost_pp,
            "case_lag_days": p.case_lag_days,
            "case_coupling_pp": p.case_coupling_pp,
            "clamped_rate_days": clamped_days,
            "n_posts": p.posts_per_day * len(self.days),
        }

    # -- post generation ---------------------------------------------------

    def posts_for_day(self, city_id: str, day: datetime.date) -> list[PostRecord]:
        p = self.params.for_city(city_id)
        n = p.posts_per_day
        if n == 0:
            return []
        day_idx = (day - self.cfg.window[0]).days
        mask_rate = self._rates[city_id][0][day_idx]
        group_rate = self._rates[city_id][1][day_idx]
        rng = _rng(self.params.seed, city_id, day_idx)

        cat = rng.random(n)
        is_group = cat < group_rate
        is_single = (~is_group) & (cat < group_rate + p.single_face_rate)
        extra = rng.poisson(p.group_extra_faces_mean, n)
        n_faces = np.where(is_group, 2 + extra, np.where(is_single, 1, 0))

        blm_active = (
            p.blm_share > 0.0
            and city_id in self.cfg.blm_cities
            and self.cfg.blm_window[0] <= day <= self.cfg.blm_window[1]
        )
        is_blm = rng.random(n) < p.blm_share if blm_active else np.zeros(n, dtype=bool)

        likes_raw = np.floor(
            np.exp(rng.normal(math.log(p.like_median), p.like_sigma, n))
        ).astype(np.int64)
        threshold = self.cfg.celebrity_like_threshold
        is_celeb = rng.random(n) < p.celebrity_rate
        likes = np.where(
            is_celeb,
            threshold + 1 + likes_raw,
            np.minimum(likes_raw, threshold),
        )
        seconds = rng.integers(0, 86400, n)
        filler_idx = rng.integers(0, len(_FILLER_TAGS), n)
        blm_tag_pool = sorted(self.cfg.blm_tags)
        blm_tag_idx = rng.integers(0, max(len(blm_tag_pool), 1), n)

        total_faces = int(n_faces.sum())
        if total_faces:
            per_face_post = np.repeat(np.arange(n), n_faces)
            face_rate = np.full(total_faces, mask_rate)
            if blm_active and p.blm_mask_boost_pp != 0.0:
                face_rate = face_rate + (
                    p.blm_mask_boost_pp / 100.0
                ) * is_blm[per_face_post]
            face_rate = np.clip(face_rate, 0.0, 1.0)
            face_masked = rng.random(total_faces) < face_rate
            face_prob_u = rng.random(total_faces)
            mix_high = rng.random(total_faces) < p.fit_high_share
            a, b = 4.0 * p.fit_sharpness, p.fit_sharpness
            high_scores = 100.0 * rng.beta(a, b, total_faces)
            low_scores = 100.0 * rng.beta(b, 2.0 * b, total_faces)
            fit_scores = np.where(mix_high, high_scores, low_scores)
            has_ref = rng.random(total_faces) < p.seg_ref_rate
        day_iso = day.isoformat()

        posts: list[PostRecord] = []
        face_cursor = 0
        jitter = p.landmark_jitter
        lm_rng = _rng(self.params.seed, city_id, day_idx, "lm") if jitter else None
        for i in range(n):
            k = int(n_faces[i])
            faces = []
            for _ in range(k):
                masked = bool(face_masked[face_cursor])
                u = float(face_prob_u[face_cursor])
                prob = 0.7 + 0.3 * u if masked else 0.3 * u
                post_id = f"{city_id}-{day_iso}-{i:06d}"
                if masked and bool(has_ref[face_cursor]):
                    seg = f"masks/{post_id}_{len(faces)}.pgm"
                    score = float(fit_scores[face_cursor])
                else:
                    seg = None
                    score = None
                landmarks = (
                    generate_landmarks(lm_rng, jitter) if lm_rng else CANONICAL_LANDMARKS
                )
                faces.append(
                    FaceRecord(
                        landmarks=landmarks,
                        mask_label=MaskLabel.MASKED if masked else MaskLabel.UNMASKED,
                        mask_probability=prob,
                        seg_mask_ref=seg,
                        fit_score=score,
                    )
                )
                face_cursor += 1
            tags = [_FILLER_TAGS[filler_idx[i]], city_id]
            if is_blm[i]:
                tags.append(blm_tag_pool[blm_tag_idx[i]])
            ts = datetime.datetime.combine(
                day, datetime.time(tzinfo=UTC)
            ) + datetime.timedelta(seconds=int(seconds[i]))
            posts.append(
                PostRecord(
                    post_id=f"{city_id}-{day_iso}-{i:06d}",
                    city_id=city_id,
                    timestamp=ts,
                    tags=frozenset(tags),
                    like_count=int(likes[i]),
                    faces=tuple(faces),
                )
            )
        return posts

    def iter_city_posts(self, city_id: str) -> Iterator[PostRecord]:
        for day in self.days:
            yield from self.posts_for_day(city_id, day)

    def iter_posts(self) -> Iterator[PostRecord]:
        for city_id in self.cfg.city_ids:
            yield from self.iter_city_posts(city_id)


def generate_corpus(
    params: SynthParams, cfg: StudyConfig | None = None
) -> tuple[Iterator[PostRecord], dict[str, CaseSeries], dict]:
    """Build a deterministic corpus: (post stream, case series, manifest)."""
    corpus = SynthCorpus(params, cfg or default_study_config())
    return corpus.iter_posts(), corpus.case_series, corpus.manifest


def params_from_dict(doc: dict) -> SynthParams:
    cities = {
        city_id: replace(CityParams(), **overrides)
        for city_id, overrides in doc.get("cities", {}).items()
    }
    return SynthParams(seed=int(doc.get("seed", 20200201)), cities=cities)
