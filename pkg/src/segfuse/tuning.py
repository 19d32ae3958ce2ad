"""Sweep the fusion threshold over a validation set and pick an operating point."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyTable, InvalidConfig, InvariantViolation
from .fusion import FusionConfig, instance_scores, partition
from .masks import ScoreMap
from .metrics import DEFAULT_IOU, greedy_assign, pairwise_ious, confidence_order, precision_recall


def default_grid(start=0.0, stop=0.20, step=0.005) -> list[float]:
    """Evenly spaced thresholds, ``stop`` included; values rounded to kill float drift."""
    if step <= 0:
        raise InvalidConfig(f"sweep step must be positive, got {step}")
    n = int(round((stop - start) / step))
    return [round(start + k * step, 10) for k in range(n + 1)]


@dataclass(frozen=True, order=True)
class SweepRow:
    c: float
    precision: float
    recall: float
    fp: int
    fn: int


@dataclass
class SweepTable:
    rows: list[SweepRow]

    def canonical(self) -> "SweepTable":
        return SweepTable(sorted(set(self.rows)))


@dataclass(frozen=True)
class SelectionPolicy:
    max_recall_drop: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.max_recall_drop <= 1.0:
            raise InvalidConfig(f"max_recall_drop={self.max_recall_drop} outside [0, 1]")


class _ScoredImage:
    """One validation image with its per-instance scores and IoUs computed once."""

    def __init__(self, preds, gts, score_map: ScoreMap):
        self.preds = list(preds)
        self.n_gt = len(gts)
        self.scores = instance_scores(self.preds, score_map)
        self.ious = pairwise_ious(self.preds, gts)
        self.order = confidence_order(self.preds)

    def counts(self, c: float, iou_threshold: float) -> tuple[int, int, int]:
        fused = partition(self.preds, self.scores, FusionConfig(c))
        keep = {id(p) for p in fused.accepted}
        kept_order = [i for i in self.order if id(self.preds[i]) in keep]
        assigned = greedy_assign(self.ious, kept_order, iou_threshold)
        tp = sum(assigned[i] >= 0 for i in kept_order)
        return tp, len(kept_order) - tp, self.n_gt - tp


def sweep_thresholds(
    val_preds: Sequence[Sequence],
    val_gts: Sequence[Sequence],
    maps_per_image: Sequence[ScoreMap],
    c_values: Sequence[float],
    iou_threshold: float = DEFAULT_IOU,
) -> SweepTable:
    """Fuse at each ``c`` and tabulate precision, recall, FP and FN."""
    if not c_values:
        raise InvalidConfig("c_values must not be empty")
    for c in c_values:
        if not 0.0 <= c <= 1.0:
            raise InvalidConfig(f"threshold {c} outside [0, 1]")
    if not len(val_preds) == len(val_gts) == len(maps_per_image):
        raise InvariantViolation("predictions, ground truths and score maps must align per image")
    images = [_ScoredImage(p, g, m) for p, g, m in zip(val_preds, val_gts, maps_per_image)]
    rows = []
    for c in sorted(c_values):
        tp = fp = fn = 0
        for image in images:
            a, b, d = image.counts(c, iou_threshold)
            tp, fp, fn = tp + a, fp + b, fn + d
        precision, recall = precision_recall(tp, fp, fn)
        rows.append(SweepRow(float(c), precision, recall, fp, fn))
    return SweepTable(rows)


def select_threshold(table: SweepTable, policy: SelectionPolicy | None = None) -> float:
    """Smallest ``c`` with the best precision among rows within the recall budget."""
    policy = policy or SelectionPolicy()
    rows = table.canonical().rows
    if not rows:
        raise EmptyTable("cannot select a threshold from an empty sweep")
    floor = max(r.recall for r in rows) - policy.max_recall_drop
    eligible = [r for r in rows if r.recall >= floor]
    best = max(r.precision for r in eligible)
    return min(r.c for r in eligible if r.precision == best)
