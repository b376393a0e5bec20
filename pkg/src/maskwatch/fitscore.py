"""Mask-fit scoring against an ROI raster, score binning, and the
confusion-matrix / bitmap evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInputError, EmptyRoiError
from .geometry import BitMask

# A fit score is the percentage of ROI pixels covered by the predicted mask
# region, in [0, 100].
FitScore = float

N_BINS = 10


def fit_score(pred: BitMask, roi: BitMask) -> FitScore:
    """Percentage of ROI pixels covered by the predicted-positive pixels."""
    pred._require_shape(roi)
    roi_count = roi.count
    if roi_count == 0:
        raise EmptyRoiError("ROI has no pixels")
    covered = int(np.count_nonzero(pred.array & roi.array))
    return 100.0 * covered / roi_count


@dataclass(frozen=True)
class FitHistogram:
    """Counts for the ten score ranges [0,10], (10,20], ..., (90,100]."""

    bins: tuple[int, ...] = (0,) * N_BINS
    total: int = 0

    def __post_init__(self):
        if len(self.bins) != N_BINS:
            raise ValueError(f"need {N_BINS} bins")
        if any(b < 0 for b in self.bins) or sum(self.bins) != self.total:
            raise ValueError("bin counts must be non-negative and sum to total")

    def __add__(self, other: "FitHistogram") -> "FitHistogram":
        return FitHistogram(
            tuple(a + b for a, b in zip(self.bins, other.bins)),
            self.total + other.total,
        )


def score_bin(score: FitScore) -> int:
    """1-based bin index; bin 1 covers [0, 10], bin b covers (10(b-1), 10b]."""
    if not (0.0 <= score <= 100.0) or not math.isfinite(score):
        raise ValueError(f"fit score {score} outside [0, 100]")
    if score <= 10.0:
        return 1
    return math.ceil(score / 10.0)


def bin_scores(scores: Iterable[FitScore]) -> FitHistogram:
    counts = [0] * N_BINS
    for s in scores:
        counts[score_bin(s) - 1] += 1
    return FitHistogram(tuple(counts), sum(counts))


def share_above(hist: FitHistogram, threshold_bin: int) -> float:
    """Percentage of scores in bins strictly above ``threshold_bin``."""
    if not 1 <= threshold_bin <= N_BINS:
        raise ValueError(f"threshold bin {threshold_bin} outside 1..{N_BINS}")
    if hist.total == 0:
        raise EmptyInputError("empty histogram")
    return 100.0 * sum(hist.bins[threshold_bin:]) / hist.total


@dataclass(frozen=True)
class SegMetrics:
    iou: float
    recall: float
    accuracy: float


def segmentation_metrics(pred: BitMask, gt: BitMask) -> SegMetrics:
    """IOU / recall / pixel accuracy of a predicted mask vs ground truth.

    Empty-set conventions keep the metrics total: iou is 1.0 when both masks
    are empty, recall is 1.0 when the ground truth is empty.
    """
    pred._require_shape(gt)
    inter = int(np.count_nonzero(pred.array & gt.array))
    union = int(np.count_nonzero(pred.array | gt.array))
    gt_count = gt.count
    matching = int(np.count_nonzero(pred.array == gt.array))
    return SegMetrics(
        iou=inter / union if union else 1.0,
        recall=inter / gt_count if gt_count else 1.0,
        accuracy=matching / pred.array.size,
    )


@dataclass(frozen=True)
class ClsMetrics:
    precision: float
    recall: float
    accuracy: float
    tp: int
    fp: int
    tn: int
    fn: int


def classification_metrics(tp: int, fp: int, tn: int, fn: int) -> ClsMetrics:
    """Precision / recall / accuracy from confusion-matrix counts.

    Vacuous-positive convention: precision is 1.0 when tp+fp = 0 and recall
    is 1.0 when tp+fn = 0.
    """
    counts = (tp, fp, tn, fn)
    if any(c < 0 for c in counts):
        raise ValueError("confusion counts must be non-negative")
    total = sum(counts)
    if total == 0:
        raise EmptyInputError("all confusion counts are zero")
    return ClsMetrics(
        precision=tp / (tp + fp) if tp + fp else 1.0,
        recall=tp / (tp + fn) if tp + fn else 1.0,
        accuracy=(tp + tn) / total,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )
