"""Biometric PAD metrics on liveness scores: AUC, EER, HTER, FFR at a fixed FLR.

Bonafide (label 1) is the positive class and a sample is accepted as live
when its score is >= the threshold. FLR is the fraction of masks accepted,
FFR the fraction of bonafide samples rejected.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from sklearn import metrics as skm

from ..exceptions import MetricError
from ..mstmap.traces import BONAFIDE, MASK


@dataclass(frozen=True)
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray
    subject_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        labels = np.asarray(self.labels).reshape(-1).astype(np.int64)
        if scores.shape != labels.shape:
            raise MetricError(f"{scores.size} scores for {labels.size} labels")
        if self.subject_ids and len(self.subject_ids) != scores.size:
            raise MetricError(f"{len(self.subject_ids)} subject ids for {scores.size} scores")
        if not np.isin(labels, (MASK, BONAFIDE)).all():
            raise MetricError("labels must be 0 (mask) or 1 (bonafide)")
        if not np.isfinite(scores).all():
            raise MetricError("scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))

    @classmethod
    def concat(cls, parts: Sequence["ScoredSet"]) -> "ScoredSet":
        ids: Tuple[str, ...] = ()
        if all(p.subject_ids for p in parts):
            ids = tuple(i for p in parts for i in p.subject_ids)
        return cls(
            scores=np.concatenate([p.scores for p in parts]) if parts else np.zeros(0),
            labels=np.concatenate([p.labels for p in parts]) if parts else np.zeros(0, dtype=np.int64),
            subject_ids=ids,
        )

    def __len__(self) -> int:
        return self.scores.size

    @property
    def bonafide(self) -> np.ndarray:
        return self.scores[self.labels == BONAFIDE]

    @property
    def mask(self) -> np.ndarray:
        return self.scores[self.labels == MASK]

    @property
    def has_both_classes(self) -> bool:
        return self.bonafide.size > 0 and self.mask.size > 0

    def require_both_classes(self, metric: str) -> None:
        if not self.has_both_classes:
            raise MetricError(
                f"{metric} needs both classes (bonafide={self.bonafide.size}, mask={self.mask.size})"
            )


def roc_auc(s: ScoredSet) -> float:
    """P(bonafide score > mask score), ties counted 1/2 (Mann-Whitney U)."""
    s.require_both_classes("AUC")
    n_bona, n_mask = s.bonafide.size, s.mask.size
    ranks = stats.rankdata(s.scores)
    u = ranks[s.labels == BONAFIDE].sum() - n_bona * (n_bona + 1) / 2.0
    return float(u / (n_bona * n_mask))


def roc_auc_trapezoid(s: ScoredSet) -> float:
    """Trapezoidal area under the full ROC curve."""
    s.require_both_classes("AUC")
    fpr, tpr, _ = skm.roc_curve(s.labels, s.scores, pos_label=BONAFIDE, drop_intermediate=False)
    return float(skm.auc(fpr, tpr))


@dataclass(frozen=True)
class OperatingPoints:
    """Thresholds ascending; FLR falls and FFR rises along the table."""

    thresholds: np.ndarray
    flr: np.ndarray
    ffr: np.ndarray


def operating_points(s: ScoredSet) -> OperatingPoints:
    """Accept-all, every midpoint between adjacent distinct scores, then reject-all."""
    s.require_both_classes("operating points")
    distinct = np.unique(s.scores)
    thresholds = np.concatenate(
        [distinct[:1], (distinct[:-1] + distinct[1:]) / 2.0, [np.nextafter(distinct[-1], np.inf)]]
    )
    mask = np.sort(s.mask)
    bona = np.sort(s.bonafide)
    flr = (mask.size - np.searchsorted(mask, thresholds, side="left")) / mask.size
    ffr = np.searchsorted(bona, thresholds, side="left") / bona.size
    return OperatingPoints(thresholds=thresholds, flr=flr, ffr=ffr)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: OperatingPoints) -> np.ndarray:
    """Lower convex hull of the (FLR, FFR, threshold) points, FLR ascending."""
    table = np.stack([points.flr, points.ffr, points.thresholds], axis=1)
    table = table[np.lexsort((table[:, 1], table[:, 0]))]
    hull = []
    for p in table:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    return np.array(hull)


def eer(s: ScoredSet) -> Tuple[float, float]:
    """(EER, threshold) where FLR meets FFR on the ROC convex hull.

    The crossing is linearly interpolated between adjacent hull vertices, and
    so is the threshold.
    """
    hull = convex_hull(operating_points(s))
    gap = hull[:, 0] - hull[:, 1]
    i = int(np.argmax(gap >= 0))
    if gap[i] == 0 or i == 0:
        return float(hull[i, 0]), float(hull[i, 2])
    t = -gap[i - 1] / (gap[i] - gap[i - 1])
    rate = hull[i - 1, 0] + t * (hull[i, 0] - hull[i - 1, 0])
    threshold = hull[i - 1, 2] + t * (hull[i, 2] - hull[i - 1, 2])
    return float(rate), float(threshold)


def ffr_at_flr(s: ScoredSet, flr_target: float = 0.01) -> float:
    """FFR at the smallest threshold with FLR <= target, interpolated when the
    target falls between two operating points."""
    points = operating_points(s)
    j = int(np.argmax(points.flr <= flr_target))
    if j == 0 or points.flr[j] == flr_target:
        return float(points.ffr[j])
    x0, x1 = points.flr[j - 1], points.flr[j]
    y0, y1 = points.ffr[j - 1], points.ffr[j]
    return float(y0 + (flr_target - x0) * (y1 - y0) / (x1 - x0))


def error_rates(s: ScoredSet, threshold: float) -> Tuple[float, float]:
    """(FAR, FRR) at a fixed threshold; a missing class contributes 0."""
    far = float(np.mean(s.mask >= threshold)) if s.mask.size else 0.0
    frr = float(np.mean(s.bonafide < threshold)) if s.bonafide.size else 0.0
    return far, frr


def hter(s: ScoredSet, threshold: float) -> float:
    far, frr = error_rates(s, threshold)
    return (far + frr) / 2.0


@dataclass(frozen=True)
class MetricsReport:
    auc: float
    eer: float
    eer_threshold: float
    ffr_at_flr: float
    hter: Optional[float] = None
    threshold: Optional[float] = None
    flr_target: float = 0.01
    n_bonafide: int = 0
    n_mask: int = 0

    def format(self) -> str:
        hter_text = "na" if self.hter is None else f"{self.hter:.6f}"
        return (
            f"auc={self.auc:.6f} eer={self.eer:.6f} hter={hter_text} "
            f"ffr_at_flr_{self.flr_target:g}={self.ffr_at_flr:.6f}"
        )


def evaluate(s: ScoredSet, threshold: Optional[float] = None, flr_target: float = 0.01) -> MetricsReport:
    """Every metric of one scored set; HTER only when a threshold is supplied."""
    rate, eer_threshold = eer(s)
    return MetricsReport(
        auc=roc_auc(s),
        eer=rate,
        eer_threshold=eer_threshold,
        ffr_at_flr=ffr_at_flr(s, flr_target),
        hter=None if threshold is None else hter(s, threshold),
        threshold=threshold,
        flr_target=flr_target,
        n_bonafide=int(s.bonafide.size),
        n_mask=int(s.mask.size),
    )
