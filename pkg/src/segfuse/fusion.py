"""Accept or reject instance proposals by their mean in-mask semantic score."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .errors import EmptyMask, InvalidConfig, InvariantViolation
from .masks import BinaryMask, ScoreMap, mean_score_in_mask

PERSON_CATEGORY = 1
DEFAULT_THRESHOLD = 0.04


@dataclass(frozen=True)
class InstancePrediction:
    instance_id: Hashable
    confidence: float
    mask: BinaryMask
    category_id: int = PERSON_CATEGORY

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvariantViolation(
                f"instance {self.instance_id!r}: confidence {self.confidence} outside [0, 1]"
            )

    @property
    def bbox(self):
        return self.mask.bbox


@dataclass(frozen=True)
class FusionConfig:
    threshold_c: float = DEFAULT_THRESHOLD
    empty_mask_policy: str = "reject"

    def __post_init__(self):
        if not 0.0 <= self.threshold_c <= 1.0:
            raise InvalidConfig(f"threshold_c={self.threshold_c} outside [0, 1]")
        if self.empty_mask_policy not in ("reject", "error"):
            raise InvalidConfig(f"unknown empty_mask_policy {self.empty_mask_policy!r}")


@dataclass
class FusionResult:
    accepted: list[InstancePrediction] = field(default_factory=list)
    # (instance, mean score); the score is NaN for zero-area proposals
    rejected: list[tuple[InstancePrediction, float]] = field(default_factory=list)


def instance_scores(instances: Sequence[InstancePrediction], score_map: ScoreMap) -> list[float]:
    """Mean in-mask score per instance, NaN for empty masks."""
    scores = []
    for inst in instances:
        if inst.mask.area == 0:
            # still reject on size mismatch
            if inst.mask.shape != score_map.shape:
                mean_score_in_mask(inst.mask, score_map)
            scores.append(math.nan)
        else:
            scores.append(mean_score_in_mask(inst.mask, score_map))
    return scores


def partition(instances, scores, cfg: FusionConfig) -> FusionResult:
    """Route pre-scored instances; shared by :func:`fuse_instances` and threshold sweeps."""
    result = FusionResult()
    for inst, score in zip(instances, scores):
        if math.isnan(score):
            if cfg.empty_mask_policy == "error":
                raise EmptyMask(f"instance {inst.instance_id!r} has an empty mask")
            result.rejected.append((inst, score))
        elif score >= cfg.threshold_c:
            result.accepted.append(inst)
        else:
            result.rejected.append((inst, score))
    return result


def fuse_instances(
    instances: Sequence[InstancePrediction],
    score_map: ScoreMap,
    cfg: FusionConfig | None = None,
) -> FusionResult:
    """Keep each instance whose mean semantic score over its mask is at least ``c``.

    Instances are never modified; input order is preserved within both
    the accepted and the rejected lists. Zero-area masks are rejected or
    raise :class:`EmptyMask`, depending on ``cfg.empty_mask_policy``.
    """
    cfg = cfg or FusionConfig()
    if cfg.empty_mask_policy == "error":
        for inst in instances:
            if inst.mask.area == 0:
                raise EmptyMask(f"instance {inst.instance_id!r} has an empty mask")
    return partition(instances, instance_scores(instances, score_map), cfg)
