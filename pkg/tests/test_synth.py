import dataclasses

import numpy as np
import pytest

from segfuse.errors import InvalidConfig, PlacementFailure, SeparationTooSmall
from segfuse.fusion import FusionConfig, fuse_instances
from segfuse.metrics import match_detections, summary_metrics
from segfuse.synth import SceneConfig, expected_metrics, generate_benchmark, generate_scene


def _overlap(a, b):
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def test_empty_scene():
    cfg = SceneConfig(true_count=0, reflection_count=0, seed=3)
    b = generate_scene(cfg)
    assert b.predictions == [] and b.ground_truths == []
    assert b.score_map.values.max() < 0.05
    assert b.score_map.values.min() >= 0.0


def test_same_seed_is_bit_identical():
    cfg = SceneConfig(seed=42)
    a, b = generate_scene(cfg), generate_scene(cfg)
    assert np.array_equal(a.score_map.values, b.score_map.values)
    assert a.predictions == b.predictions and a.ground_truths == b.ground_truths
    c = generate_scene(dataclasses.replace(cfg, seed=43))
    assert not np.array_equal(a.score_map.values, c.score_map.values)


def test_layout_invariants():
    cfg = SceneConfig(seed=9)
    b = generate_scene(cfg)
    mx0, my0, mx1, my1 = cfg.mirror_rect
    assert len(b.predictions) == cfg.true_count + cfg.reflection_count
    assert len(b.ground_truths) == cfg.true_count
    for r in b.reflection_rects:
        assert mx0 < r[0] and r[2] < mx1 and my0 < r[1] and r[3] < my1
        assert (r[2] - r[0], r[3] - r[1]) == cfg.reflection_size
    for r in b.true_rects:
        assert not _overlap(r, cfg.mirror_rect)
    rects = b.true_rects + b.reflection_rects
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            assert not _overlap(rects[i], rects[j])
    gt_ids = {g.gt_id for g in b.ground_truths}
    assert all(":r" in p.instance_id for p in b.predictions[cfg.true_count:])
    assert not gt_ids & {p.instance_id for p in b.predictions}
    lo, hi = cfg.detector_confidence_range
    assert all(lo <= p.confidence <= hi for p in b.predictions)


def test_five_and_five_fuse_to_five():
    b = generate_scene(SceneConfig(seed=1))
    rows = b.score_map.values
    # recount the in-mask means straight from the rectangles
    for rect in b.true_rects:
        assert abs(rows[rect[1]:rect[3], rect[0]:rect[2]].mean() - 0.6) < 0.01
    for rect in b.reflection_rects:
        assert abs(rows[rect[1]:rect[3], rect[0]:rect[2]].mean() - 0.01) < 0.01
    res = fuse_instances(b.predictions, b.score_map, FusionConfig(0.04))
    assert len(res.accepted) == 5 and len(res.rejected) == 5
    assert all(":t" in p.instance_id for p in res.accepted)


def test_expected_metrics_closed_form():
    exp = expected_metrics(SceneConfig(), 0.04)
    assert exp.pre_fusion.precision == 0.5 and exp.post_fusion.precision == 1.0
    assert exp.pre_fusion.recall == exp.post_fusion.recall == 1.0
    none = expected_metrics(SceneConfig(reflection_count=0), 0.04)
    assert none.pre_fusion == none.post_fusion
    assert none.pre_fusion.precision == 1.0
    high = expected_metrics(SceneConfig(), 0.9)
    assert high.post_fusion.recall == 0.0 and high.post_fusion.tp == 0


def test_expected_metrics_refuses_without_separation():
    with pytest.raises(SeparationTooSmall):
        expected_metrics(SceneConfig(), 0.011)
    with pytest.raises(SeparationTooSmall):
        expected_metrics(SceneConfig(semantic_noise=0.2), 0.04)


@pytest.mark.parametrize("seed", range(0, 100))
def test_end_to_end_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    cfg = SceneConfig(
        true_count=int(rng.integers(0, 7)),
        reflection_count=int(rng.integers(0, 7)),
        semantic_score_true=float(rng.uniform(0.3, 0.9)),
        semantic_score_reflection=float(rng.uniform(0.0, 0.02)),
        seed=seed,
    )
    c = 0.04
    b = generate_scene(cfg, c=c)
    exp = expected_metrics(cfg, c)
    assert b.expected == exp
    pre = summary_metrics(match_detections(b.predictions, b.ground_truths))
    fused = fuse_instances(b.predictions, b.score_map, FusionConfig(c))
    post = summary_metrics(match_detections(fused.accepted, b.ground_truths))
    assert (pre.tp, pre.fp, pre.fn) == (exp.pre_fusion.tp, exp.pre_fusion.fp, exp.pre_fusion.fn)
    assert pre.fp == cfg.reflection_count
    assert (post.tp, post.fp, post.fn) == (exp.post_fusion.tp, exp.post_fusion.fp, exp.post_fusion.fn)
    assert (post.precision, post.recall) == (exp.post_fusion.precision, exp.post_fusion.recall)


def test_placement_failure():
    with pytest.raises(PlacementFailure):
        generate_scene(SceneConfig(image_width=200, image_height=200, mirror_rect=(0, 0, 200, 40),
                                   true_count=40, reflection_count=0, max_attempts=50))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"true_count": -1},
        {"semantic_score_true": 1.5},
        {"mirror_rect": (0, 0, 700, 100)},
        {"detector_confidence_range": (0.9, 0.1)},
        {"person_width": 1000},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(InvalidConfig):
        SceneConfig(**kwargs)


def test_benchmark_ids_and_seeds():
    bundles = generate_benchmark(SceneConfig(seed=5), 3)
    assert [b.image_id for b in bundles] == [1, 2, 3]
    again = generate_scene(SceneConfig(seed=6), image_id=2)
    assert np.array_equal(again.score_map.values, bundles[1].score_map.values)
