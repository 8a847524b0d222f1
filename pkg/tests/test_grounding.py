import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivekit.geometry import center_distance
from drivekit.grounding import (
    COCO_IOU_THRESHOLDS,
    average_precision_3d,
    f1_3d,
    interpolated_ap,
    map_3d,
    normalize_command,
    planning_accuracy,
    pr_at_k,
    pr_at_k_scenes,
    vg2d_metrics,
)
from drivekit.model import Box2D, Box3D


def at(x=0.0, y=0.0, z=0.0, l=1.0, w=1.0, h=1.0, yaw=0.0):
    return Box3D(x, y, z, l, w, h, yaw)


# --- Pr@k ------------------------------------------------------------------

def test_pr_identical():
    res = pr_at_k([at()], [at()])
    assert res.per_k == {0.5: 1.0, 1.0: 1.0, 2.0: 1.0, 4.0: 1.0} and res.mean == 1.0


def test_pr_offset_fixture():
    res = pr_at_k([at(0, 0.6, 0)], [at()])
    assert res.per_k == {0.5: 0.0, 1.0: 1.0, 2.0: 1.0, 4.0: 1.0}
    assert res.mean == 0.75


def test_pr_two_gts_one_pred():
    res = pr_at_k([at()], [at(), at(10, 0, 0)])
    assert all(v == 0.5 for v in res.per_k.values()) and res.mean == 0.5


def test_pr_empty_conventions():
    assert pr_at_k([], []).mean == 1.0
    assert pr_at_k([at()], []).mean == 0.0
    assert pr_at_k([], [at()]).mean == 0.0


def test_pr_rejects_bad_ks():
    with pytest.raises(ValueError):
        pr_at_k([], [], ks=(2.0, 1.0))
    with pytest.raises(ValueError):
        pr_at_k([], [], ks=(0.0, 1.0))


def test_pr_distance_is_strict_and_uses_z():
    assert pr_at_k([at(0, 0, 1.0)], [at()], ks=(1.0, 2.0)).per_k == {1.0: 0.0, 2.0: 1.0}


def _random_scene(rng, max_n=4):
    gts = [at(*rng.uniform(-5, 5, 3)) for _ in range(rng.integers(0, max_n + 1))]
    preds = [at(*rng.uniform(-5, 5, 3)) for _ in range(rng.integers(0, max_n + 1))]
    return preds, gts


def test_pr_monotone_in_k():
    rng = np.random.default_rng(0)
    for _ in range(300):
        preds, gts = _random_scene(rng)
        vals = list(pr_at_k(preds, gts).per_k.values())
        assert vals == sorted(vals)


def _best_hits(preds, gts, k):
    n, m = len(gts), len(preds)
    best = 0
    if n <= m:
        for perm in itertools.permutations(range(m), n):
            best = max(best, sum(center_distance(preds[p], gts[g]) < k for g, p in enumerate(perm)))
    else:
        for perm in itertools.permutations(range(n), m):
            best = max(best, sum(center_distance(preds[p], gts[g]) < k for p, g in enumerate(perm)))
    return best


def test_pr_never_exceeds_best_injection():
    rng = np.random.default_rng(1)
    for _ in range(200):
        preds, gts = _random_scene(rng, 3)
        if not gts:
            continue
        res = pr_at_k(preds, gts)
        for k, v in res.per_k.items():
            assert v <= _best_hits(preds, gts, k) / len(gts) + 1e-12


def test_min_distance_matching_can_trade_hits_at_one_k():
    # minimum total distance pairs (0.5,1)->g0 and (1,0.75)->g1; the other pairing has two hits under 1 m
    gts = [at(0.0, 0.25), at(0.25, 1.25)]
    preds = [at(0.5, 1.0), at(1.0, 0.75)]
    res = pr_at_k(preds, gts)
    assert res.per_k[1.0] == 0.5
    assert _best_hits(preds, gts, 1.0) == 2


def test_pr_pools_over_scenes():
    res = pr_at_k_scenes([([at()], [at()]), ([], [at(), at(3, 0, 0)])])
    assert res.mean == pytest.approx(1 / 3)


def test_pr_translation_invariant():
    rng = np.random.default_rng(2)
    for _ in range(100):
        preds, gts = _random_scene(rng)
        shift = rng.uniform(-100, 100, 3)

        def move(bs):
            return [at(b.cx + shift[0], b.cy + shift[1], b.cz + shift[2]) for b in bs]

        a, b = pr_at_k(preds, gts).per_k, pr_at_k(move(preds), move(gts)).per_k
        for k in a:
            assert a[k] == b[k] or abs(a[k] - b[k]) < 1e-12


# --- AP / mAP ---------------------------------------------------------------

def test_ap_examples():
    assert average_precision_3d([(at(), 1.0)], [at()]) == 1.0
    assert average_precision_3d([(at(0.3), 0.9), (at(5.0), 0.8)], [at()]) == 1.0
    assert average_precision_3d([], [at()]) == 0.0


def test_ap_fp_ranked_first():
    # FP first then TP: precision 0.5 at recall 1
    assert average_precision_3d([(at(5.0), 0.9), (at(0.3), 0.8)], [at()]) == pytest.approx(0.5)


def test_ap_uses_bev_distance():
    assert average_precision_3d([(at(0, 0, 3.0), 1.0)], [at()]) == 1.0


def test_ap_hand_computed_two_gts():
    # TP, FP, TP: recall 0.5 at precision 1, recall 1 at precision 2/3
    preds = [(at(0.1), 0.9), (at(9.0), 0.8), (at(20.1), 0.7)]
    ap = average_precision_3d(preds, [at(), at(20.0)])
    assert ap == pytest.approx((51 * 1.0 + 50 * (2 / 3)) / 101)


def test_map_examples():
    assert map_3d({"car": [(at(), 1.0)]}, {"car": [at()]}) == 1.0
    assert map_3d({"car": [(at(), 1.0)]}, {"car": [at()], "truck": [at(5.0)]}) == 0.5
    assert map_3d({}, {"car": [at()]}) == 0.0
    assert map_3d({}, {}) == 1.0
    assert map_3d({"car": [(at(), 1.0)]}, {}) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.booleans()), max_size=12), st.integers(0, 6))
def test_ap_bounds(matches, n_gt):
    n_tp = sum(tp for _, tp in matches)
    if n_tp > n_gt:
        return
    ap = interpolated_ap(matches, n_gt)
    assert 0.0 <= ap <= 1.0


def test_ap_one_iff_all_tps_first():
    assert interpolated_ap([(0.9, True), (0.8, True), (0.1, False)], 2) == 1.0
    assert interpolated_ap([(0.9, True), (0.8, False), (0.1, True)], 2) < 1.0
    assert interpolated_ap([(0.9, True)], 2) < 1.0


# --- F1 ---------------------------------------------------------------------

def test_f1_examples():
    assert tuple(f1_3d([at()], [at()])) == (1.0, 1.0, 1.0)
    # IoU of a 0.1 m shift of a unit cube is 0.9/1.1
    p, r, f = f1_3d([at(0.05)], [at(), at(10.0)])
    assert (p, r) == (1.0, 0.5) and f == pytest.approx(2 / 3)
    assert tuple(f1_3d([], [at()])) == (0.0, 0.0, 0.0)


def test_f1_threshold_strict():
    # unit cubes offset 0.5 m have IoU 1/3
    assert f1_3d([at(0.5)], [at()], iou_thresh=0.3).f1 == 1.0
    assert f1_3d([at(0.5)], [at()], iou_thresh=0.34).f1 == 0.0
    with pytest.raises(ValueError):
        f1_3d([], [], iou_thresh=1.0)


# --- 2D ---------------------------------------------------------------------

def test_vg2d_examples():
    a = Box2D(0, 0, 2, 2)
    assert tuple(vg2d_metrics([(a, 1.0)], [a])) == (1.0, 1.0, 1.0)
    m, f1, miou = vg2d_metrics([(Box2D(1, 1, 3, 3), 1.0)], [a])
    assert miou == pytest.approx(1 / 7) and f1 == 0.0 and m == 0.0
    assert tuple(vg2d_metrics([], [])) == (1.0, 1.0, 1.0)
    assert tuple(vg2d_metrics([(a, 1.0)], [])) == (0.0, 0.0, 0.0)


def test_vg2d_map_counts_thresholds():
    # IoU 0.64: a hit for thresholds 0.50..0.60, a miss above
    gt = Box2D(0, 0, 10, 10)
    pred = Box2D(0, 0, 10, 6.4)
    m, _, miou = vg2d_metrics([(pred, 1.0)], [gt])
    assert miou == pytest.approx(0.64)
    assert m == pytest.approx(sum(t <= 0.64 for t in COCO_IOU_THRESHOLDS) / 10)


def test_vg2d_unmatched_gt_counts_zero_iou():
    a, b = Box2D(0, 0, 2, 2), Box2D(10, 10, 12, 12)
    assert vg2d_metrics([(a, 1.0)], [a, b]).miou == 0.5


# --- planning ---------------------------------------------------------------

def test_planning():
    assert planning_accuracy(["turn_left"], ["turn_left"]) == 1.0
    assert planning_accuracy(["turn_left", "go_straight"], ["turn_left", "turn_right"]) == 0.5
    assert planning_accuracy(["Turn Left."], ["turn_left"]) == 1.0
    assert planning_accuracy([None], ["go_straight"]) == 0.0
    assert normalize_command("  Go straight! ") == "go_straight"
    with pytest.raises(ValueError):
        planning_accuracy(["turn_left"], [])
    with pytest.raises(ValueError):
        planning_accuracy(["x"], ["reverse"])


# --- translation invariance across metrics ---------------------------------

def test_translation_invariance_all_3d_metrics():
    rng = random.Random(4)
    for _ in range(60):
        gts = [at(rng.uniform(-3, 3), rng.uniform(-3, 3), 0, yaw=rng.uniform(-3, 3)) for _ in range(3)]
        preds = [Box3D(g.cx + rng.uniform(-0.6, 0.6), g.cy + rng.uniform(-0.6, 0.6), 0, 1, 1, 1, g.yaw)
                 for g in gts[:2]]
        d = (rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-5, 5))

        def move(b):
            return Box3D(b.cx + d[0], b.cy + d[1], b.cz + d[2], b.l, b.w, b.h, b.yaw)

        mp, mg = [move(b) for b in preds], [move(b) for b in gts]
        assert f1_3d(preds, gts).f1 == pytest.approx(f1_3d(mp, mg).f1, abs=1e-12)
        scored = [(b, 0.9 - 0.1 * i) for i, b in enumerate(preds)]
        moved = [(b, 0.9 - 0.1 * i) for i, b in enumerate(mp)]
        assert map_3d({"car": scored}, {"car": gts}) == pytest.approx(map_3d({"car": moved}, {"car": mg}), abs=1e-12)
