import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import memory_sequence
from lowlight_bench.attributes import AttributeSet
from lowlight_bench.dataset import Box, TrackResult
from lowlight_bench.metrics import (
    EvalReport,
    MetricConfig,
    MetricError,
    center_error,
    evaluate,
    iou,
    iou_array,
    norm_center_error,
    pnorm_auc,
    precision_at,
    precision_curve,
    rank,
    s_auc,
    success_curve,
    trapezoid_auc,
)


def pixel_iou(a, b):
    """Oracle: IoU from explicit pixel-set membership on a 100x100 grid."""
    def mask(box):
        m = np.zeros((100, 100), bool)
        x, y, w, h = (int(v) for v in box)
        m[y:y + h, x:x + w] = True
        return m
    ma, mb = mask(a), mask(b)
    return np.logical_and(ma, mb).sum() / np.logical_or(ma, mb).sum()


def random_int_boxes(rng, n):
    x = rng.integers(0, 99, n)
    y = rng.integers(0, 99, n)
    w = rng.integers(1, 101 - x)
    h = rng.integers(1, 101 - y)
    return np.stack([x, y, np.minimum(w, 100 - x), np.minimum(h, 100 - y)], axis=1)


def test_iou_matches_pixel_oracle():
    rng = np.random.default_rng(7)
    a, b = random_int_boxes(rng, 300), random_int_boxes(rng, 300)
    got = iou_array(a, b)
    want = np.array([pixel_iou(p, q) for p, q in zip(a, b)])
    assert np.max(np.abs(got - want)) < 1e-12


def test_iou_examples():
    a = Box(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, Box(20, 20, 5, 5)) == 0.0
    assert iou(a, Box(5, 0, 10, 10)) == pytest.approx(50 / 150, abs=1e-15)
    assert iou(a, Box(10, 0, 10, 10)) == 0.0  # touching edges


coord = st.floats(-50, 50, allow_nan=False)
size = st.floats(0.1, 60, allow_nan=False)
box_st = st.builds(Box, coord, coord, size, size)


@settings(max_examples=200)
@given(box_st, box_st, st.floats(-30, 30), st.floats(-30, 30))
def test_iou_properties(a, b, dx, dy):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    assert iou(a, a) == pytest.approx(1.0)
    moved = iou(Box(a.x + dx, a.y + dy, a.w, a.h), Box(b.x + dx, b.y + dy, b.w, b.h))
    assert moved == pytest.approx(v, abs=1e-9)


def test_center_error_examples():
    a = Box(0, 0, 10, 10)
    assert center_error(a, a) == 0.0
    assert center_error(a, Box(3, 4, 10, 10)) == 5.0
    assert center_error(a, Box(0, 0, 20, 20)) == pytest.approx(math.sqrt(50), abs=1e-12)


def test_norm_center_error_examples():
    gt = Box(0, 0, 10, 10)
    assert norm_center_error(gt, gt) == 0.0
    assert norm_center_error(Box(3, 4, 10, 10), gt) == pytest.approx(0.5, abs=1e-15)
    tr = Box(3 + 5, 4, 10, 10)  # centre (13, 9) vs gt centre (10, 5)
    assert norm_center_error(tr, Box(0, 0, 20, 10)) == pytest.approx(math.sqrt(0.0225 + 0.16), abs=1e-12)


@settings(max_examples=100)
@given(box_st, box_st, st.sampled_from([0.5, 2.0, 3.0, 7.5]))
def test_scale_invariance(tr, gt, s):
    scale = lambda b: Box(b.x * s, b.y * s, b.w * s, b.h * s)  # noqa: E731
    assert norm_center_error(scale(tr), scale(gt)) == pytest.approx(norm_center_error(tr, gt), rel=1e-9, abs=1e-12)
    assert center_error(scale(tr), scale(gt)) == pytest.approx(s * center_error(tr, gt), rel=1e-9, abs=1e-12)


def test_success_curve_examples():
    c = success_curve([1.0, 1.0])
    assert c.values[:-1] == [1.0] * 50 and c.values[-1] == 0.0
    assert success_curve([0.0, 0.0]).values == [0.0] * 51
    assert success_curve([0.25, 0.75]).value_at(0.5) == 0.5


def test_s_auc_examples():
    assert s_auc([1.0] * 5) == 1.0
    assert s_auc([0.2, 0.4, 0.6]) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(MetricError, match="no evaluable frames"):
        s_auc([])


def test_precision_examples():
    assert precision_at([0.0, 0.0]) == 1.0
    assert precision_at([5.0, 25.0]) == 0.5
    assert precision_at([20.0]) == 1.0
    assert precision_curve([20.0]).value_at(19) == 0.0


def test_pnorm_examples():
    assert pnorm_auc([0.0, 0.0]) == 1.0
    assert pnorm_auc([0.6, 0.51]) == 0.0
    assert pnorm_auc([0.25]) == pytest.approx(26 / 51, abs=1e-15)


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=200))
def test_curves_monotone_and_auc_consistent(ious):
    c = success_curve(ious)
    assert all(a >= b for a, b in zip(c.values, c.values[1:]))
    p = precision_curve([50 * (1 - v) for v in ious])
    assert all(a <= b for a, b in zip(p.values, p.values[1:]))
    assert abs(trapezoid_auc(c) - s_auc(ious)) <= 0.02


def test_evaluate_excludes_absent_frames():
    gt = [Box(10, 10, 20, 20)] * 10
    vis = [0, 0, 0, 2, 3, 0, 0, 0, 0, 0]
    seq = memory_sequence("s", [b if v < 2 else None for b, v in zip(gt, vis)], vis)
    tr = [Box(10, 10, 20, 20)] * 3 + [Box(90, 90, 1, 1)] * 2 + [Box(10, 10, 20, 20)] * 5
    rep = evaluate({"s": TrackResult("s", tr)}, [seq])
    assert rep.evaluated_frame_count == 8
    assert rep.s_auc == 1.0 and rep.p_at_20 == 1.0 and rep.p_norm_auc == 1.0


def test_evaluate_sequence_weighting_and_attributes():
    a = memory_sequence("a", [Box(0, 0, 10, 10)] * 2)
    b = memory_sequence("b", [Box(0, 0, 10, 10)] * 6)
    res = {
        "a": TrackResult("a", [Box(0, 0, 10, 10), Box(5, 0, 10, 10)]),
        "b": TrackResult("b", [Box(0, 0, 10, 10)] * 6),
    }
    attrs = {"a": AttributeSet(frozenset({"LAI"})), "b": AttributeSet(frozenset())}
    rep = evaluate(res, [a, b], attrs)
    assert rep.s_auc == pytest.approx(((1 + 1 / 3) / 2 + 1.0) / 2)
    frame_rep = evaluate(res, [a, b], attrs, config=MetricConfig(weighting="frame"))
    assert frame_rep.s_auc == pytest.approx((1 + 1 / 3 + 6) / 8)
    assert rep.per_attribute["LAI"].n_sequences == 1
    assert rep.per_attribute["LAI"].s_auc == pytest.approx((1 + 1 / 3) / 2)
    assert rep.per_attribute["SV"].empty and rep.per_attribute["SV"].s_auc is None


def test_report_dict_round_trip():
    seq = memory_sequence("s", [Box(0, 0, 10, 10), Box(1, 1, 10, 10)])
    rep = evaluate({"s": TrackResult("s", [Box(0, 0, 10, 10), Box(3, 1, 9, 10)])}, [seq])
    assert EvalReport.from_dict(rep.to_dict()) == rep


def _rep(name, s, p=0.5, pn=0.5):
    seq = memory_sequence("s", [Box(0, 0, 1, 1)] * 2)
    r = evaluate({"s": TrackResult("s", [Box(0, 0, 1, 1)] * 2)}, [seq], tracker_name=name)
    r.s_auc, r.p_at_20, r.p_norm_auc = s, p, pn
    return r


def test_rank_order_and_ties():
    assert [r.s_auc for r in rank([_rep("a", 0.3), _rep("b", 0.5)])] == [0.5, 0.3]
    assert [r.tracker_name for r in rank([_rep("a", 0.5, 0.4), _rep("b", 0.5, 0.6)])] == ["b", "a"]
    only = _rep("x", 0.1)
    assert rank([only]) == [only]


@settings(max_examples=30)
@given(st.permutations(range(6)))
def test_rank_is_total_order(perm):
    reps = [_rep(f"t{i}", s, p) for i, (s, p) in enumerate([(0.5, 0.1), (0.5, 0.1), (0.4, 0.9), (0.5, 0.3),
                                                              (0.2, 0.2), (0.4, 0.9)])]
    base = [r.tracker_name for r in rank(reps)]
    assert [r.tracker_name for r in rank([reps[i] for i in perm])] == base
