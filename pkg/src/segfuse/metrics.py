"""Matching of predictions to ground truth and the detection metrics built on it.

Matching is greedy and one-to-one: predictions are visited by descending
confidence (ties broken by ``instance_id``) and each claims the unmatched
ground truth with the highest mask IoU at or above the threshold.

Curves are computed per distinct confidence threshold ``t`` using the
predictions with ``confidence >= t``. Because greedy matching visits
predictions in confidence order, the matching restricted to a threshold is
a prefix of the full matching, so every threshold is served from one pass.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import InvalidConfig, InvariantViolation, ZeroImages
from .fusion import PERSON_CATEGORY, InstancePrediction
from .masks import iou_matrix

DEFAULT_IOU = 0.5
AR_IOU_THRESHOLDS = tuple(i / 100 for i in range(50, 100, 5))
RECALL_SAMPLES = tuple(i / 100 for i in range(101))


@dataclass(frozen=True)
class GroundTruthInstance:
    gt_id: Hashable
    mask: BinaryMask
    image_id: Hashable = None
    category_id: int = PERSON_CATEGORY

    def __post_init__(self):
        if self.mask.area == 0:
            raise InvariantViolation(f"ground truth {self.gt_id!r} has an empty mask")


@dataclass
class MatchResult:
    matches: list[tuple[InstancePrediction, GroundTruthInstance, float]] = field(default_factory=list)
    false_positives: list[InstancePrediction] = field(default_factory=list)
    false_negatives: list[GroundTruthInstance] = field(default_factory=list)

    @property
    def tp(self) -> int:
        return len(self.matches)

    @property
    def fp(self) -> int:
        return len(self.false_positives)

    @property
    def fn(self) -> int:
        return len(self.false_negatives)

    def __add__(self, other: "MatchResult") -> "MatchResult":
        return MatchResult(
            self.matches + other.matches,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
        )


@dataclass(frozen=True)
class CurvePoint:
    x: float
    y: float
    threshold: float


@dataclass
class MetricsReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float = 1.0
    recall: float = 1.0
    ap: float = 0.0
    ar: float = 0.0
    pr_curve: list[CurvePoint] = field(default_factory=list)
    mr_fppi_curve: list[CurvePoint] = field(default_factory=list)


def precision_recall(tp: int, fp: int, fn: int) -> tuple[float, float]:
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return precision, recall


def id_sort_key(instance_id):
    """Total order over mixed int/str ids; ints sort numerically before strings."""
    if isinstance(instance_id, (int, np.integer)) and not isinstance(instance_id, bool):
        return (0, int(instance_id), "")
    return (1, 0, str(instance_id))


def confidence_order(preds: Sequence[InstancePrediction]) -> list[int]:
    return sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, id_sort_key(preds[i].instance_id)))


def _check_iou_threshold(iou_threshold):
    if not 0.0 < iou_threshold <= 1.0:
        raise InvalidConfig(f"IoU threshold {iou_threshold} outside (0, 1]")


def greedy_assign(ious: np.ndarray, order: Sequence[int], iou_threshold: float) -> list[int]:
    """Assigned gt index per prediction (in ``order``), -1 if unmatched."""
    n_gt = ious.shape[1]
    taken = np.zeros(n_gt, dtype=bool)
    assigned = [-1] * ious.shape[0]
    for i in order:
        if n_gt == 0:
            break
        row = np.where(taken, -1.0, ious[i])
        j = int(np.argmax(row))
        if row[j] >= iou_threshold:
            taken[j] = True
            assigned[i] = j
    return assigned


def pairwise_ious(preds, gts):
    return iou_matrix([p.mask for p in preds], [g.mask for g in gts])


def match_detections(
    preds: Sequence[InstancePrediction],
    gts: Sequence[GroundTruthInstance],
    iou_threshold: float = DEFAULT_IOU,
) -> MatchResult:
    """Greedy one-to-one matching for a single image."""
    _check_iou_threshold(iou_threshold)
    ious = pairwise_ious(preds, gts)
    order = confidence_order(preds)
    assigned = greedy_assign(ious, order, iou_threshold)
    result = MatchResult()
    matched_gt = set()
    for i in order:
        j = assigned[i]
        if j < 0:
            result.false_positives.append(preds[i])
        else:
            result.matches.append((preds[i], gts[j], float(ious[i, j])))
            matched_gt.add(j)
    result.false_negatives = [g for j, g in enumerate(gts) if j not in matched_gt]
    return result


def summary_metrics(match: MatchResult) -> MetricsReport:
    precision, recall = precision_recall(match.tp, match.fp, match.fn)
    return MetricsReport(tp=match.tp, fp=match.fp, fn=match.fn, precision=precision, recall=recall)


def _check_aligned(preds_per_image, gts_per_image):
    if len(preds_per_image) != len(gts_per_image):
        raise InvariantViolation(
            f"{len(preds_per_image)} prediction lists but {len(gts_per_image)} ground-truth lists"
        )


def _map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _outcomes(preds_per_image, gts_per_image, iou_threshold, jobs=None):
    """Per-prediction ``(confidence, is_tp)`` pairs pooled over images, plus the gt total."""
    _check_iou_threshold(iou_threshold)
    _check_aligned(preds_per_image, gts_per_image)

    def one(pair):
        preds, gts = pair
        assigned = greedy_assign(pairwise_ious(preds, gts), confidence_order(preds), iou_threshold)
        return [(p.confidence, a >= 0) for p, a in zip(preds, assigned)]

    per_image = _map(one, list(zip(preds_per_image, gts_per_image)), jobs)
    outcomes = [o for image in per_image for o in image]
    n_gt = sum(len(g) for g in gts_per_image)
    return outcomes, n_gt


def _threshold_counts(outcomes, n_gt):
    """``(t, tp, fp, fn)`` for each distinct confidence, ascending in ``t``."""
    if not outcomes:
        return []
    confs = np.array([c for c, _ in outcomes], dtype=np.float64)
    hits = np.array([h for _, h in outcomes], dtype=np.int64)
    order = np.argsort(-confs, kind="stable")
    confs, hits = confs[order], hits[order]
    cum_tp = np.cumsum(hits)
    rows = []
    # last index of each run of equal confidence, walking high to low
    ends = np.flatnonzero(np.append(confs[1:] != confs[:-1], True))
    for k in ends:
        tp = int(cum_tp[k])
        retained = int(k) + 1
        rows.append((float(confs[k]), tp, retained - tp, n_gt - tp))
    rows.reverse()
    return rows


def pr_curve(preds_per_image, gts_per_image, iou_threshold: float = DEFAULT_IOU, jobs=None) -> list[CurvePoint]:
    """Precision (y) against recall (x), one point per distinct confidence, ascending threshold."""
    outcomes, n_gt = _outcomes(preds_per_image, gts_per_image, iou_threshold, jobs)
    points = []
    for t, tp, fp, fn in _threshold_counts(outcomes, n_gt):
        precision, recall = precision_recall(tp, fp, fn)
        points.append(CurvePoint(recall, precision, t))
    return points


def average_precision(curve: Sequence[CurvePoint]) -> float:
    """101-point interpolated AP over a precision/recall curve."""
    if not curve:
        return 0.0
    recalls = np.array([p.x for p in curve], dtype=np.float64)
    precisions = np.array([p.y for p in curve], dtype=np.float64)
    order = np.argsort(recalls, kind="stable")
    recalls, precisions = recalls[order], precisions[order]
    # running max from the right gives max precision over recall >= r
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    samples = np.array(RECALL_SAMPLES)
    idx = np.searchsorted(recalls, samples, side="left")
    interp = np.zeros(len(samples))
    valid = idx < len(recalls)
    interp[valid] = envelope[idx[valid]]
    return float(interp.sum() / len(samples))


def miss_rate_fppi_curve(
    preds_per_image,
    gts_per_image,
    iou_threshold: float = DEFAULT_IOU,
    image_count: int | None = None,
    jobs=None,
) -> list[CurvePoint]:
    """Miss rate (y) against false positives per image (x), ascending threshold.

    With no predictions at all the curve is the single operating point of
    an empty detector, reported at threshold ``inf``.
    """
    if image_count is None:
        image_count = len(preds_per_image)
    if image_count < 1:
        raise ZeroImages("miss rate vs FPPI needs at least one image")
    outcomes, n_gt = _outcomes(preds_per_image, gts_per_image, iou_threshold, jobs)
    rows = _threshold_counts(outcomes, n_gt)
    if not rows:
        rows = [(float("inf"), 0, 0, n_gt)]
    points = []
    for t, tp, fp, fn in rows:
        # 1 - recall rather than fn / (tp + fn) so the two curves agree bit for bit
        miss = 1.0 - precision_recall(tp, fp, fn)[1]
        points.append(CurvePoint(fp / image_count, miss, t))
    return points


def average_recall(preds_per_image, gts_per_image, jobs=None) -> float:
    """Recall with all predictions kept, averaged over IoU 0.50:0.05:0.95."""
    _check_aligned(preds_per_image, gts_per_image)
    pairs = list(zip(preds_per_image, gts_per_image))

    def one(pair):
        preds, gts = pair
        return pairwise_ious(preds, gts), confidence_order(preds)

    prepared = _map(one, pairs, jobs)
    n_gt = sum(len(g) for g in gts_per_image)
    recalls = []
    for thr in AR_IOU_THRESHOLDS:
        tp = sum(sum(a >= 0 for a in greedy_assign(ious, order, thr)) for ious, order in prepared)
        recalls.append(tp / n_gt if n_gt else 1.0)
    return float(sum(recalls) / len(recalls))


def evaluate(
    preds_per_image,
    gts_per_image,
    iou_threshold: float = DEFAULT_IOU,
    image_count: int | None = None,
    jobs=None,
) -> MetricsReport:
    """Full report: counts at all predictions, both curves, AP and AR."""
    _check_aligned(preds_per_image, gts_per_image)
    total = MatchResult()
    for preds, gts in zip(preds_per_image, gts_per_image):
        total = total + match_detections(preds, gts, iou_threshold)
    report = summary_metrics(total)
    report.pr_curve = pr_curve(preds_per_image, gts_per_image, iou_threshold, jobs)
    report.ap = average_precision(report.pr_curve)
    report.ar = average_recall(preds_per_image, gts_per_image, jobs)
    report.mr_fppi_curve = miss_rate_fppi_curve(
        preds_per_image, gts_per_image, iou_threshold, image_count, jobs
    )
    return report
