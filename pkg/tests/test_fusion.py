import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from helpers import pred, rect_mask
from segfuse.errors import DimensionMismatch, EmptyMask, InvalidConfig, InvariantViolation
from segfuse.fusion import FusionConfig, InstancePrediction, fuse_instances
from segfuse.masks import BinaryMask, ScoreMap


def two_instance_scene():
    values = np.zeros((10, 20))
    values[1:5, 1:6] = 0.5
    values[1:5, 10:15] = 0.01
    a = pred("a", 0.9, rect_mask(20, 10, 1, 1, 6, 5))
    b = pred("b", 0.8, rect_mask(20, 10, 10, 1, 15, 5))
    return [a, b], ScoreMap(values)


def test_default_threshold():
    assert FusionConfig().threshold_c == 0.04
    assert FusionConfig().empty_mask_policy == "reject"


def test_high_score_accepted():
    inst = pred(1, 0.7, rect_mask(5, 5, 0, 0, 3, 3))
    res = fuse_instances([inst], ScoreMap.uniform(5, 5, 0.8))
    assert res.accepted == [inst] and res.rejected == []


def test_constructed_pair():
    insts, smap = two_instance_scene()
    rows = smap.values.tolist()
    means = [oracles.mean_in_mask(oracles.pixels(i.mask), rows) for i in insts]
    assert means == pytest.approx([0.5, 0.01], abs=1e-15)
    res = fuse_instances(insts, smap, FusionConfig(0.04))
    assert res.accepted == [insts[0]]
    assert [r[0] for r in res.rejected] == [insts[1]]
    assert res.rejected[0][1] == pytest.approx(0.01, abs=1e-15)


def test_zero_threshold_is_identity():
    insts, smap = two_instance_scene()
    zero = ScoreMap.uniform(20, 10, 0.0)
    assert fuse_instances(insts, zero, FusionConfig(0.0)).accepted == insts
    assert fuse_instances(insts, smap, FusionConfig(0.0)).accepted == insts


def test_boundary_is_inclusive():
    inst = pred(1, 0.7, rect_mask(4, 4, 0, 0, 2, 2))
    assert fuse_instances([inst], ScoreMap.uniform(4, 4, 0.25), FusionConfig(0.25)).accepted == [inst]


def test_empty_mask_policies():
    empty = pred("e", 0.9, BinaryMask(4, 4, (16,)))
    full = pred("f", 0.9, rect_mask(4, 4, 0, 0, 4, 4))
    smap = ScoreMap.uniform(4, 4, 0.5)
    res = fuse_instances([empty, full], smap)
    assert res.accepted == [full]
    assert res.rejected[0][0] is empty and math.isnan(res.rejected[0][1])
    with pytest.raises(EmptyMask):
        fuse_instances([empty, full], smap, FusionConfig(empty_mask_policy="error"))


def test_dimension_mismatch():
    inst = pred(1, 0.5, rect_mask(4, 4, 0, 0, 2, 2))
    with pytest.raises(DimensionMismatch):
        fuse_instances([inst], ScoreMap.uniform(5, 4, 0.5))
    empty = pred(2, 0.5, BinaryMask(4, 4, (16,)))
    with pytest.raises(DimensionMismatch):
        fuse_instances([empty], ScoreMap.uniform(5, 4, 0.5))


def test_config_validation():
    with pytest.raises(InvalidConfig):
        FusionConfig(1.5)
    with pytest.raises(InvalidConfig):
        FusionConfig(0.1, "keep")
    with pytest.raises(InvariantViolation):
        InstancePrediction(1, 1.2, BinaryMask(1, 1, (1,)))


def _random_scene(seed, n=8, w=12, h=10):
    rng = np.random.default_rng(seed)
    smap = ScoreMap(rng.random((h, w)) * rng.random())
    insts = []
    for k in range(n):
        x0, y0 = rng.integers(0, w - 1), rng.integers(0, h - 1)
        x1, y1 = rng.integers(x0 + 1, w + 1), rng.integers(y0 + 1, h + 1)
        insts.append(pred(k, float(rng.random()), rect_mask(w, h, x0, y0, x1, y1)))
    return insts, smap


@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_monotone_partition_and_untouched(seed, c1, c2):
    c1, c2 = sorted((c1, c2))
    insts, smap = _random_scene(seed)
    r1 = fuse_instances(insts, smap, FusionConfig(c1))
    r2 = fuse_instances(insts, smap, FusionConfig(c2))
    ids1 = [i.instance_id for i in r1.accepted]
    ids2 = [i.instance_id for i in r2.accepted]
    assert set(ids2) <= set(ids1)
    for res, c in ((r1, c1), (r2, c2)):
        routed = res.accepted + [r[0] for r in res.rejected]
        assert sorted(i.instance_id for i in routed) == list(range(len(insts)))
        assert all(s < c for _, s in res.rejected)
        # order preserved, objects passed through untouched
        assert [i.instance_id for i in res.accepted] == sorted(i.instance_id for i in res.accepted)
        assert all(any(a is b for b in insts) for a in res.accepted)


def test_deterministic():
    insts, smap = _random_scene(7)
    a = fuse_instances(insts, smap, FusionConfig(0.2))
    b = fuse_instances(insts, smap, FusionConfig(0.2))
    assert a.accepted == b.accepted and a.rejected == b.rejected
