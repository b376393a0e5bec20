"""Facial-landmark ROI geometry: index sets, convex hulls, polygon rasters.

Coordinates are continuous pixels (x right, y down). Rasters snap only at
the final rasterization step: a pixel (row i, col j) is covered when its
center (j + 0.5, i + 0.5) lies inside or on the polygon boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateGeometryError,
    EmptyRoiError,
    InvalidPolygonError,
    ShapeMismatchError,
)

Point = tuple[float, float]

N_LANDMARKS = 68

# 1-based landmark index sets for the two face regions. The jaw region feeds
# the mask/no-mask classifier upstream; the nose-mouth region is the ROI the
# fit score is computed against.
_JAW_INDICES = tuple(range(5, 14)) + tuple(range(31, 37)) + tuple(range(49, 69))
_NOSE_MOUTH_INDICES = tuple(range(32, 37)) + tuple(range(49, 69))


class RoiRegion(Enum):
    JAW = "jaw"
    NOSE_MOUTH = "nose_mouth"


def roi_landmark_indices(region: RoiRegion) -> tuple[int, ...]:
    """Fixed 1-based landmark indices defining the given face region."""
    if region is RoiRegion.JAW:
        return _JAW_INDICES
    return _NOSE_MOUTH_INDICES


@dataclass(frozen=True)
class LandmarkSet:
    """Exactly 68 planar landmark points plus the detected face rectangle.

    ``face_box`` is (x, y, width, height); when omitted it defaults to the
    bounding box of the points, padded to at least 1px extent per side.
    """

    points: tuple[Point, ...]
    face_box: tuple[float, float, float, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if len(self.points) != N_LANDMARKS:
            raise ValueError(f"landmark count {len(self.points)} != {N_LANDMARKS}")
        for x, y in self.points:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("landmark coordinates must be finite")
            if x < 0 or y < 0:
                raise ValueError("landmark coordinates must be >= 0")
        if self.face_box is None:
            xs = [p[0] for p in self.points]
            ys = [p[1] for p in self.points]
            box = (min(xs), min(ys), max(max(xs) - min(xs), 1.0), max(max(ys) - min(ys), 1.0))
            object.__setattr__(self, "face_box", box)
        else:
            _, _, w, h = self.face_box
            if w <= 0 or h <= 0:
                raise ValueError("face_box must have positive width and height")

    def region_points(self, region: RoiRegion) -> tuple[Point, ...]:
        return tuple(self.points[i - 1] for i in roi_landmark_indices(region))


def _signed_area(vertices: Sequence[Point]) -> float:
    s = 0.0
    n = len(vertices)
    for k in range(n):
        x1, y1 = vertices[k]
        x2, y2 = vertices[(k + 1) % n]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a: Point, b: Point, p: Point) -> bool:
    # assumes p collinear with a-b
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def _segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with counterclockwise vertices (positive signed area)."""

    vertices: tuple[Point, ...]

    def __post_init__(self):
        v = self.vertices
        n = len(v)
        if n < 3:
            raise InvalidPolygonError("polygon needs at least 3 vertices")
        for k in range(n):
            if v[k] == v[(k + 1) % n]:
                raise InvalidPolygonError("repeated consecutive vertex")
        if _signed_area(v) <= 0:
            raise InvalidPolygonError("vertices must be in counterclockwise order")
        self._check_simple()

    def _check_simple(self):
        v = self.vertices
        n = len(v)
        for i in range(n):
            a1, a2 = v[i], v[(i + 1) % n]
            for j in range(i + 1, n):
                b1, b2 = v[j], v[(j + 1) % n]
                adjacent = (j == i + 1) or (i == 0 and j == n - 1)
                if adjacent:
                    # shared endpoint is fine; a collinear double-back is not
                    shared = a2 if j == i + 1 else a1
                    other_a = a1 if shared == a2 else a2
                    other_b = b2 if shared == b1 else b1
                    if _orient(shared, other_a, other_b) == 0:
                        da = (other_a[0] - shared[0], other_a[1] - shared[1])
                        db = (other_b[0] - shared[0], other_b[1] - shared[1])
                        if da[0] * db[0] + da[1] * db[1] > 0:
                            raise InvalidPolygonError("edges double back (spike)")
                    continue
                if _segments_intersect(a1, a2, b1, b2):
                    raise InvalidPolygonError("polygon is self-intersecting")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.vertices]
        ys = [p[1] for p in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)


def polygon_area(polygon: Polygon) -> float:
    """Shoelace area in pixel^2 (positive for the CCW invariant)."""
    return _signed_area(polygon.vertices)


def convex_hull(points: Iterable[Point]) -> Polygon:
    """Minimal convex polygon containing all points (monotone chain).

    Raises DegenerateGeometryError for < 3 distinct points or an all-collinear
    input. Collinear edge points are not kept as vertices.
    """
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) < 3:
        raise DegenerateGeometryError("need at least 3 distinct points")

    def half(chain_pts):
        chain: list[Point] = []
        for p in chain_pts:
            while len(chain) >= 2 and _orient(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateGeometryError("points are collinear")
    return Polygon(tuple(hull))


class BitMask:
    """Row-major boolean pixel grid; thin wrapper over a numpy bool array."""

    __slots__ = ("array",)

    def __init__(self, array: np.ndarray):
        array = np.asarray(array)
        if array.ndim != 2:
            raise ValueError("bitmask must be 2-dimensional")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError("bitmask dimensions must be >= 1")
        self.array = array.astype(bool, copy=False)

    @classmethod
    def zeros(cls, width: int, height: int) -> "BitMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BitMask":
        return cls(np.ones((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @property
    def count(self) -> int:
        """Number of true pixels."""
        return int(np.count_nonzero(self.array))

    def same_shape(self, other: "BitMask") -> bool:
        return self.array.shape == other.array.shape

    def __and__(self, other: "BitMask") -> "BitMask":
        self._require_shape(other)
        return BitMask(self.array & other.array)

    def __or__(self, other: "BitMask") -> "BitMask":
        self._require_shape(other)
        return BitMask(self.array | other.array)

    def __invert__(self) -> "BitMask":
        return BitMask(~self.array)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMask):
            return NotImplemented
        return self.array.shape == other.array.shape and bool(
            np.array_equal(self.array, other.array)
        )

    def __repr__(self) -> str:
        return f"BitMask({self.width}x{self.height}, {self.count} set)"

    def _require_shape(self, other: "BitMask"):
        if not self.same_shape(other):
            raise ShapeMismatchError(
                f"bitmask shapes differ: {self.width}x{self.height} vs "
                f"{other.width}x{other.height}"
            )


def rasterize(polygon: Polygon, width: int, height: int) -> BitMask:
    """Pixel-center rasterization: even-odd crossings plus inclusive boundary.

    The per-pixel arithmetic matches a scalar even-odd point-in-polygon test
    exactly (same IEEE operations, vectorized), so results are bit-identical
    to such an oracle.
    """
    if width < 1 or height < 1:
        raise ValueError("raster dimensions must be >= 1")
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    px = xs[np.newaxis, :]
    py = ys[:, np.newaxis]

    inside = np.zeros((height, width), dtype=bool)
    on_edge = np.zeros((height, width), dtype=bool)
    verts = polygon.vertices
    n = len(verts)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(n):
            x1, y1 = verts[k]
            x2, y2 = verts[(k + 1) % n]
            cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
            on_edge |= (
                (cross == 0.0)
                & (px >= min(x1, x2))
                & (px <= max(x1, x2))
                & (py >= min(y1, y2))
                & (py <= max(y1, y2))
            )
            crossing = (y1 > py) != (y2 > py)
            xint = (x2 - x1) * (py - y1) / (y2 - y1) + x1
            inside ^= crossing & (px < xint)
    return BitMask(inside | on_edge)


def build_roi_raster(
    landmarks: LandmarkSet, region: RoiRegion, grid_w: int, grid_h: int
) -> BitMask:
    """Raster of the convex hull of the region's landmarks on the given grid.

    The grid is the segmentation bitmap's coordinate grid; landmarks are
    expected in the same pixel space.
    """
    hull = convex_hull(landmarks.region_points(region))
    raster = rasterize(hull, grid_w, grid_h)
    if raster.count == 0:
        raise EmptyRoiError(
            f"{region.value} ROI covers no pixels on a {grid_w}x{grid_h} grid"
        )
    return raster
