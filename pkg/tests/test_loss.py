import math

import numpy as np
import pytest

from drivekit.loss import (
    LossWeights,
    assign_targets,
    combine,
    encode_box,
    focal_loss,
    gradient_check,
    l1_loss,
    total_loss,
)
from drivekit.model import Box3D

# two queries, one class plus background: the matched query has p = 0.5, the
# background query's probability was solved so that L_cls is exactly 0.1
EXACT_PROBS = [[0.5, 0.5], [0.1, 0.6093890976017409]]
EXACT_BOXES = [[3.2, 0, 0, 0, 0, 0, 0, 1], [10.0, 0, 0, 0, 0, 0, 0, 1]]
EXACT_GT = ([0], [[0, 0, 0, 0, 0, 0, 0, 1]])


def unit_enc(cx=0.0):
    return [cx, 0, 0, 0, 0, 0, 0, 1]


def random_instance(rng):
    n_cls = int(rng.integers(1, 11))
    n_q = int(rng.integers(1, 11))
    n_gt = int(rng.integers(0, n_q + 1))
    probs = rng.uniform(0.05, 0.95, size=(n_q, n_cls + 1))
    boxes = rng.normal(size=(n_q, 8))
    angles = rng.uniform(-math.pi, math.pi, size=n_q)
    boxes[:, 6], boxes[:, 7] = np.sin(angles), np.cos(angles)
    gt_boxes = rng.normal(size=(n_gt, 8))
    gt_angles = rng.uniform(-math.pi, math.pi, size=n_gt)
    gt_boxes[:, 6], gt_boxes[:, 7] = np.sin(gt_angles), np.cos(gt_angles)
    labels = rng.integers(0, n_cls, size=n_gt)
    return probs, boxes, labels, gt_boxes


def test_encode_box():
    enc = encode_box(Box3D(1, 2, 3, math.e, 1, 1, math.pi / 2))
    assert enc == pytest.approx([1, 2, 3, 1, 0, 0, 1, 0], abs=1e-15)


def test_weights_positive():
    with pytest.raises(ValueError):
        LossWeights(lam=0.0)
    assert LossWeights().gamma == 0.25 and LossWeights().focal_gamma == 2.0


def test_focal_examples():
    assert focal_loss([[0.5, 0.5]], [0], num_gt=1) == pytest.approx(0.25 * 0.25 * math.log(2), abs=1e-15)
    assert focal_loss([[0.5, 0.5]], [0], num_gt=1) == pytest.approx(0.043322, abs=1e-6)
    assert focal_loss([[1 - 1e-15, 0.5]], [0], num_gt=1) < 1e-30
    assert focal_loss([[0.25, 0.5]], [0], 1) > focal_loss([[0.5, 0.5]], [0], 1)
    with pytest.raises(ValueError):
        focal_loss([[1.0, 0.5]], [0], 1)
    with pytest.raises(ValueError):
        focal_loss([[0.0, 0.5]], [0], 1)


def test_l1_examples():
    assert l1_loss(unit_enc(), unit_enc()) == 0.0
    assert l1_loss(unit_enc(1.0), unit_enc()) == 0.125
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b, c = rng.normal(size=(3, 8))
        assert l1_loss(a, c) <= l1_loss(a, b) + l1_loss(b, c) + 1e-12


def test_assignment_examples():
    assert assign_targets([[0.9, 0.1]], [unit_enc()], [0], [unit_enc()]) == [(0, 0)]
    # query 1 is closer and more confident
    pairs = assign_targets([[0.3, 0.5], [0.8, 0.5]], [unit_enc(3.0), unit_enc(0.1)], [0], [unit_enc()])
    assert pairs == [(1, 0)]
    assert assign_targets([[0.3, 0.5]], [unit_enc()], [], np.zeros((0, 8))) == []
    with pytest.raises(ValueError):
        assign_targets([[0.3, 0.5]], [unit_enc()], [0, 0], [unit_enc(), unit_enc()])


def test_combine_arithmetic():
    # 2 * 0.1 + 0.25 * 0.4: the exact real sum of these doubles is a rounding tie, so the
    # result is one ulp above the double nearest 0.3
    value = combine(0.1, 0.4)
    assert abs(value - 0.3) <= math.ulp(0.3)
    assert f"{value:.6f}" == "0.300000"


def test_exact_fixture_components():
    res = total_loss(EXACT_PROBS, EXACT_BOXES, *EXACT_GT)
    assert res.matching == [(0, 0)]
    assert res.cls == 0.1
    assert res.reg == 0.4
    assert res.value == combine(0.1, 0.4)
    assert f"{res.value:.6f}" == "0.300000"


def test_perfect_prediction_is_zero():
    res = total_loss([[1 - 1e-12, 1e-12]], [unit_enc()], [0], [unit_enc()])
    assert res.value == pytest.approx(0.0, abs=1e-20)


def test_no_gt_all_background():
    res = total_loss([[0.2, 0.7], [0.1, 0.9]], [unit_enc(), unit_enc(1)], [], np.zeros((0, 8)))
    assert res.matching == [] and res.reg == 0.0
    assert res.cls == pytest.approx(-0.75 * (0.3 ** 2 * math.log(0.7) + 0.1 ** 2 * math.log(0.9)))


def test_linear_in_weights():
    rng = np.random.default_rng(1)
    for _ in range(20):
        inst = random_instance(rng)
        m = total_loss(*inst).matching
        base = total_loss(*inst, matching=m)
        scaled = total_loss(*inst, weights=LossWeights(lam=4.0, gamma=0.75), matching=m)
        assert scaled.value == pytest.approx(4.0 * base.cls + 0.75 * base.reg, rel=1e-12)


def test_box_validation():
    with pytest.raises(ValueError):
        total_loss([[0.5, 0.5]], [[0, 0, 0, 0, 0, 0, 0, 0.1]], [0], [unit_enc()])
    with pytest.raises(ValueError):
        total_loss([[0.5, 0.5]], [[0, 0, 0, 0, 0, 0, 0, float("nan")]], [0], [unit_enc()])


def test_gradient_check_random_instances():
    rng = np.random.default_rng(2024)
    worst = max(gradient_check(*random_instance(rng)) for _ in range(50))
    assert worst < 1e-5


def test_gradient_of_fixed_matching_matches_manual():
    res = total_loss(EXACT_PROBS, EXACT_BOXES, *EXACT_GT)
    assert res.grad_boxes[0, 0] == pytest.approx(0.25 / 8)
    assert np.all(res.grad_boxes[1] == 0.0)
    assert res.grad_probs[0, 1] == 0.0 and res.grad_probs[1, 0] == 0.0
