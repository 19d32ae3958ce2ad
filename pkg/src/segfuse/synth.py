"""Synthetic mirror scenes with a known answer.

Each scene holds rectangular people outside a mirror and smaller copies
of people inside it. The simulated instance detector fires on both; the
simulated semantic map scores people high and reflections low, so the
outcome of fusion at any threshold in the gap is known in closed form.

Randomness comes from NumPy's Philox-4x64 counter-based generator keyed
with ``(seed, stream)``: stream 0 drives placement and detector
confidences, stream 1 drives per-pixel score noise (standard normals
from ``Generator.normal``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InvalidConfig, PlacementFailure, SeparationTooSmall
from .fusion import DEFAULT_THRESHOLD, InstancePrediction
from .masks import BinaryMask, ScoreMap
from .metrics import GroundTruthInstance, precision_recall

Rect = tuple[int, int, int, int]  # half-open x0, y0, x1, y1

SEED_MASK = (1 << 64) - 1


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & SEED_MASK, stream]))


@dataclass(frozen=True)
class SceneConfig:
    image_width: int = 640
    image_height: int = 360
    true_count: int = 5
    reflection_count: int = 5
    mirror_rect: Rect = (20, 20, 620, 150)
    person_width: int = 40
    person_height: int = 100
    reflection_scale: float = 0.5
    semantic_score_true: float = 0.6
    semantic_score_reflection: float = 0.01
    semantic_noise: float = 0.005
    detector_confidence_range: tuple[float, float] = (0.5, 1.0)
    seed: int = 0
    max_attempts: int = 1000

    def __post_init__(self):
        w, h = self.image_width, self.image_height
        if w < 1 or h < 1:
            raise InvalidConfig(f"image size {w}x{h} must be positive")
        if self.true_count < 0 or self.reflection_count < 0:
            raise InvalidConfig("instance counts must be non-negative")
        for name in ("semantic_score_true", "semantic_score_reflection", "semantic_noise"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"{name}={getattr(self, name)} outside [0, 1]")
        lo, hi = self.detector_confidence_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise InvalidConfig(f"bad detector_confidence_range {self.detector_confidence_range}")
        x0, y0, x1, y1 = self.mirror_rect
        if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
            raise InvalidConfig(f"mirror_rect {self.mirror_rect} does not fit the image")
        if not (1 <= self.person_width <= w and 1 <= self.person_height <= h):
            raise InvalidConfig("person size does not fit the image")
        if self.reflection_scale <= 0:
            raise InvalidConfig("reflection_scale must be positive")
        rw, rh = self.reflection_size
        if self.reflection_count and (rw > x1 - x0 - 2 or rh > y1 - y0 - 2):
            raise InvalidConfig("reflections cannot fit strictly inside the mirror")
        if self.max_attempts < 1:
            raise InvalidConfig("max_attempts must be >= 1")

    @property
    def reflection_size(self) -> tuple[int, int]:
        return (
            max(1, int(round(self.person_width * self.reflection_scale))),
            max(1, int(round(self.person_height * self.reflection_scale))),
        )


@dataclass(frozen=True)
class ExpectedCounts:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return precision_recall(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return precision_recall(self.tp, self.fp, self.fn)[1]


@dataclass(frozen=True)
class ExpectedMetrics:
    threshold: float
    pre_fusion: ExpectedCounts
    post_fusion: ExpectedCounts


@dataclass
class SceneBundle:
    image_id: int
    width: int
    height: int
    ground_truths: list[GroundTruthInstance]
    predictions: list[InstancePrediction]
    score_map: ScoreMap = field(repr=False)
    true_rects: list[Rect] = field(default_factory=list)
    reflection_rects: list[Rect] = field(default_factory=list)
    expected: Optional[ExpectedMetrics] = None


def _overlaps(a: Rect, b: Rect) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _place(rng, count, size, x_range, y_range, avoid, blocked, max_attempts, what):
    """Rejection-sample ``count`` non-overlapping rectangles."""
    w, h = size
    placed = []
    for k in range(count):
        for _ in range(max_attempts):
            x = int(rng.integers(x_range[0], x_range[1]))
            y = int(rng.integers(y_range[0], y_range[1]))
            rect = (x, y, x + w, y + h)
            if avoid is not None and _overlaps(rect, avoid):
                continue
            if any(_overlaps(rect, r) for r in blocked):
                continue
            placed.append(rect)
            blocked.append(rect)
            break
        else:
            raise PlacementFailure(
                f"could not place {what} {k + 1} of {count} after {max_attempts} attempts"
            )
    return placed


def _separation_margin(noise: float, area: int) -> float:
    # clamping bias of one pixel is at most noise/sqrt(2*pi); 6 sigma on the mean
    return noise / math.sqrt(2 * math.pi) + 6 * noise / math.sqrt(area)


def expected_metrics(cfg: SceneConfig, c: float = DEFAULT_THRESHOLD, scenes: int = 1) -> ExpectedMetrics:
    """Closed-form TP/FP/FN before and after fusion at threshold ``c``.

    Refuses (:class:`SeparationTooSmall`) when the in-mask mean of either
    instance type could land on the wrong side of ``c``: the distance to
    ``c`` must exceed six standard deviations of the mask mean plus the
    worst-case bias from clamping noisy pixels into ``[0, 1]``.
    """
    pw, ph = cfg.person_width, cfg.person_height
    rw, rh = cfg.reflection_size
    checks = []
    if cfg.true_count:
        checks.append(("true persons", cfg.semantic_score_true, pw * ph))
    if cfg.reflection_count:
        checks.append(("reflections", cfg.semantic_score_reflection, rw * rh))
    for what, score, area in checks:
        margin = _separation_margin(cfg.semantic_noise, area)
        if abs(score - c) <= margin:
            raise SeparationTooSmall(
                f"{what}: score {score} is within {margin:.6g} of c={c}; outcome not guaranteed"
            )
    n_true = cfg.true_count * scenes
    n_refl = cfg.reflection_count * scenes
    pre = ExpectedCounts(n_true, n_refl, 0)
    tp = n_true if cfg.semantic_score_true > c else 0
    fp = n_refl if cfg.semantic_score_reflection > c else 0
    return ExpectedMetrics(c, pre, ExpectedCounts(tp, fp, n_true - tp))


def generate_scene(cfg: SceneConfig, image_id: int = 1, c: float = DEFAULT_THRESHOLD) -> SceneBundle:
    """Deterministic scene for ``cfg.seed``; ``expected`` is filled when ``c`` is in the gap."""
    W, H = cfg.image_width, cfg.image_height
    pw, ph = cfg.person_width, cfg.person_height
    rw, rh = cfg.reflection_size
    mx0, my0, mx1, my1 = cfg.mirror_rect
    rng = _rng(cfg.seed, 0)
    blocked: list[Rect] = []
    true_rects = _place(
        rng, cfg.true_count, (pw, ph), (0, W - pw + 1), (0, H - ph + 1),
        cfg.mirror_rect, blocked, cfg.max_attempts, "person",
    )
    refl_rects = _place(
        rng, cfg.reflection_count, (rw, rh), (mx0 + 1, mx1 - rw), (my0 + 1, my1 - rh),
        None, blocked, cfg.max_attempts, "reflection",
    )
    lo, hi = cfg.detector_confidence_range
    confidences = [float(rng.uniform(lo, hi)) for _ in range(len(true_rects) + len(refl_rects))]

    base = np.zeros((H, W), dtype=np.float64)
    for x0, y0, x1, y1 in true_rects:
        base[y0:y1, x0:x1] = cfg.semantic_score_true
    for x0, y0, x1, y1 in refl_rects:
        base[y0:y1, x0:x1] = cfg.semantic_score_reflection
    noise = _rng(cfg.seed, 1).normal(0.0, 1.0, size=(H, W)) * cfg.semantic_noise
    score_map = ScoreMap(np.clip(base + noise, 0.0, 1.0))

    gts, preds = [], []
    for k, rect in enumerate(true_rects):
        mask = BinaryMask.from_rect(W, H, *rect)
        gts.append(GroundTruthInstance(f"{image_id}:g{k}", mask, image_id))
        preds.append(InstancePrediction(f"{image_id}:t{k}", confidences[k], mask))
    for k, rect in enumerate(refl_rects):
        mask = BinaryMask.from_rect(W, H, *rect)
        conf = confidences[len(true_rects) + k]
        preds.append(InstancePrediction(f"{image_id}:r{k}", conf, mask))

    try:
        expected = expected_metrics(cfg, c)
    except SeparationTooSmall:
        expected = None
    return SceneBundle(image_id, W, H, gts, preds, score_map, true_rects, refl_rects, expected)


def generate_benchmark(cfg: SceneConfig, scenes: int, c: float = DEFAULT_THRESHOLD) -> list[SceneBundle]:
    """``scenes`` scenes with image ids 1..n; scene ``i`` uses seed ``cfg.seed + i``."""
    if scenes < 0:
        raise InvalidConfig("scene count must be non-negative")
    return [
        generate_scene(replace(cfg, seed=(cfg.seed + i) & SEED_MASK), image_id=i + 1, c=c)
        for i in range(scenes)
    ]
