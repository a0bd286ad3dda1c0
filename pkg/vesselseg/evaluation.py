"""
Scoring predicted vessel masks against manual segmentations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from vesselseg.raster import as_mask
from vesselseg.threshold import DEFAULT_LEVELS, quantize_response

DEFAULT_ROC_STEP = 5


class EmptyPositiveClassError(ValueError):
    """Ground truth holds no vessel pixels in the scored region."""


class EmptyNegativeClassError(ValueError):
    """Ground truth holds no background pixels in the scored region."""


class MissingTruthError(ValueError):
    """A record was scored without a ground-truth file."""


@dataclass(frozen=True)
class ContingencyCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ContingencyCounts":
        """Counts with prediction and truth exchanged."""
        return ContingencyCounts(tp=self.tp, fp=self.fn, tn=self.tn, fn=self.fp)


@dataclass(frozen=True)
class RocPoint:
    threshold: int
    fpr: float
    tpr: float


@dataclass(frozen=True)
class RocCurve:
    points: Tuple[RocPoint, ...]

    def __post_init__(self) -> None:
        thresholds = [p.threshold for p in self.points]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("ROC thresholds must be strictly increasing")

    def __len__(self) -> int:
        return len(self.points)

    def at(self, threshold: int) -> Optional[RocPoint]:
        for point in self.points:
            if point.threshold == threshold:
                return point
        return None


@dataclass(frozen=True)
class MetricSummary:
    count: int
    sensitivity_mean: float
    sensitivity_sd: float
    specificity_mean: float
    specificity_sd: float


@dataclass(frozen=True)
class EvaluationConfig:
    roc_step: int = DEFAULT_ROC_STEP
    fov_restricted: bool = True

    def __post_init__(self) -> None:
        if self.roc_step < 1:
            raise ValueError(f"roc_step must be >= 1, got {self.roc_step}")


def _scored_region(shape: Tuple[int, ...], fov: Optional[np.ndarray]) -> np.ndarray:
    if fov is None:
        return np.ones(shape, dtype=bool)
    region = as_mask(fov)
    if region.shape != shape:
        raise ValueError(f"FOV shape {region.shape} does not match {shape}")
    return region


def contingency(
    pred: np.ndarray,
    truth: np.ndarray,
    fov: Optional[np.ndarray] = None,
) -> ContingencyCounts:
    """Pixel counts over the FOV, or over every pixel when ``fov`` is None."""
    p = as_mask(pred)
    t = as_mask(truth)
    if p.shape != t.shape:
        raise ValueError(f"Prediction shape {p.shape} does not match truth {t.shape}")
    region = _scored_region(p.shape, fov)
    p = p[region]
    t = t[region]
    return ContingencyCounts(
        tp=int(np.count_nonzero(p & t)),
        fp=int(np.count_nonzero(p & ~t)),
        tn=int(np.count_nonzero(~p & ~t)),
        fn=int(np.count_nonzero(~p & t)),
    )


def sens_spec(c: ContingencyCounts) -> Tuple[float, float]:
    positives = c.tp + c.fn
    negatives = c.tn + c.fp
    if positives == 0:
        raise EmptyPositiveClassError("No vessel pixels in ground truth; sensitivity is undefined")
    if negatives == 0:
        raise EmptyNegativeClassError("No background pixels in ground truth; specificity is undefined")
    return c.tp / positives, c.tn / negatives


def roc_thresholds(step: int, levels: int = DEFAULT_LEVELS) -> List[int]:
    if step < 1:
        raise ValueError(f"ROC step must be >= 1, got {step}")
    thresholds = list(range(0, levels, step))
    if thresholds[-1] != levels - 1:
        thresholds.append(levels - 1)
    return thresholds


def roc_curve(
    response: np.ndarray,
    truth: np.ndarray,
    fov: Optional[np.ndarray],
    step: int = DEFAULT_ROC_STEP,
    levels: int = DEFAULT_LEVELS,
    region: Optional[np.ndarray] = None,
) -> RocCurve:
    """
    Sweep the binarization threshold over the quantized response.

    The response is quantized exactly as for entropic thresholding, and a
    pixel is predicted vessel at threshold T when its level exceeds T and it
    lies in the FOV. Points are counted over ``region`` (defaults to the FOV).
    """
    thresholds = roc_thresholds(step, levels)
    t = as_mask(truth)
    q = quantize_response(response, levels, fov)
    if t.shape != q.shape:
        raise ValueError(f"Truth shape {t.shape} does not match response {q.shape}")
    scored = _scored_region(q.shape, fov if region is None else region)

    # Levels outside the FOV are 0, so "q > T" already excludes them for every T >= 0.
    pos_hist = np.bincount(q[scored & t], minlength=levels)
    neg_hist = np.bincount(q[scored & ~t], minlength=levels)
    pos_total = int(pos_hist.sum())
    neg_total = int(neg_hist.sum())
    pos_at_or_below = np.cumsum(pos_hist)
    neg_at_or_below = np.cumsum(neg_hist)

    points = []
    for threshold in thresholds:
        tp = pos_total - int(pos_at_or_below[threshold])
        fp = neg_total - int(neg_at_or_below[threshold])
        counts = ContingencyCounts(tp=tp, fp=fp, tn=neg_total - fp, fn=pos_total - tp)
        sensitivity, _ = sens_spec(counts)
        points.append(RocPoint(threshold=threshold, fpr=fp / neg_total, tpr=sensitivity))
    return RocCurve(tuple(points))


def aggregate(per_image: Sequence[Tuple[float, float]]) -> MetricSummary:
    """Mean and population standard deviation of per-image (sensitivity, specificity)."""
    if not per_image:
        raise ValueError("Cannot aggregate an empty list of metrics")
    values = np.asarray(per_image, dtype=np.float64)
    sens = values[:, 0]
    spec = values[:, 1]
    return MetricSummary(
        count=len(values),
        sensitivity_mean=float(sens.mean()),
        sensitivity_sd=float(sens.std(ddof=0)),
        specificity_mean=float(spec.mean()),
        specificity_sd=float(spec.std(ddof=0)),
    )
