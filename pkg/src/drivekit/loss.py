"""Numeric reference for the 3D grounding loss.

    L = lambda * L_cls + gamma * L_reg

with a Hungarian assignment between queries and GT boxes, focal
classification over the category set plus a trailing background class, and
L1 regression on an 8-d box encoding ``(cx, cy, cz, log l, log w, log h,
sin yaw, cos yaw)``. Gradients are analytic and hold the assignment fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .assignment import hungarian
from .model import Box3D

ENCODING_DIM = 8


@dataclass(frozen=True)
class LossWeights:
    lam: float = 2.0  # classification weight
    gamma: float = 0.25  # regression weight (not the focal exponent)
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0

    def __post_init__(self):
        for name in ("lam", "gamma", "focal_alpha", "focal_gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")


@dataclass
class LossResult:
    value: float
    cls: float
    reg: float
    matching: List[Tuple[int, int]]
    grad_probs: np.ndarray = field(repr=False)
    grad_boxes: np.ndarray = field(repr=False)


def encode_box(box: Box3D) -> np.ndarray:
    return np.array([box.cx, box.cy, box.cz, math.log(box.l), math.log(box.w), math.log(box.h),
                     math.sin(box.yaw), math.cos(box.yaw)])


def _check_probs(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2:
        raise ValueError(f"probs must be (queries, classes + 1), got shape {probs.shape}")
    if not np.all(np.isfinite(probs)) or np.any(probs <= 0.0) or np.any(probs >= 1.0):
        raise ValueError("class probabilities must lie strictly inside (0, 1)")
    return probs


def _check_boxes(boxes, name: str) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=float).reshape(-1, ENCODING_DIM)
    if not np.all(np.isfinite(boxes)):
        raise ValueError(f"{name} must be finite")
    norms = np.hypot(boxes[:, 6], boxes[:, 7])
    if np.any((norms < 0.5) | (norms > 2.0)):
        raise ValueError(f"{name}: (sin, cos) yaw pair norm must lie in [0.5, 2]")
    return boxes


def _check_labels(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ValueError(f"GT labels must be in [0, {num_classes})")
    return labels


def assign_targets(probs, boxes, gt_labels, gt_boxes, weights: LossWeights = LossWeights()) -> List[Tuple[int, int]]:
    """Hungarian (query, gt) matching on lam*(1 - p_class) + gamma*|box - gt|_1."""
    probs = _check_probs(probs)
    boxes = _check_boxes(boxes, "boxes")
    labels = _check_labels(gt_labels, probs.shape[1] - 1)
    gt_boxes = _check_boxes(gt_boxes, "gt_boxes")
    if len(labels) == 0:
        return []
    if probs.shape[0] < len(labels):
        raise ValueError(f"need at least as many queries ({probs.shape[0]}) as GTs ({len(labels)})")
    cls_cost = 1.0 - probs[:, labels]
    box_cost = np.abs(boxes[:, None, :] - gt_boxes[None, :, :]).sum(axis=2)
    pairs, _ = hungarian(weights.lam * cls_cost + weights.gamma * box_cost)
    return pairs


def targets_from_matching(num_queries: int, num_classes: int, gt_labels, matching) -> np.ndarray:
    targets = np.full(num_queries, num_classes, dtype=int)  # background
    for q, g in matching:
        targets[q] = int(gt_labels[g])
    return targets


def focal_terms(p_t: np.ndarray, alpha_t: np.ndarray, focal_gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-query focal loss and its derivative with respect to p_t."""
    one_minus = 1.0 - p_t
    log_p = np.log(p_t)
    loss = -alpha_t * one_minus ** focal_gamma * log_p
    d = alpha_t * (focal_gamma * one_minus ** (focal_gamma - 1.0) * log_p - one_minus ** focal_gamma / p_t)
    return loss, d


def focal_loss(probs, targets, num_gt: int, alpha: float = 0.25, focal_gamma: float = 2.0) -> float:
    """Sum over queries of -a_t (1 - p_t)^g log p_t, divided by max(1, num_gt).

    ``targets[q]`` is the class index for query q; the last column of
    ``probs`` is background, which is weighted by ``1 - alpha``.
    """
    probs = _check_probs(probs)
    targets = np.asarray(targets, dtype=int)
    bg = probs.shape[1] - 1
    p_t = probs[np.arange(len(targets)), targets]
    alpha_t = np.where(targets == bg, 1.0 - alpha, alpha)
    loss, _ = focal_terms(p_t, alpha_t, focal_gamma)
    return float(loss.sum() / max(1, num_gt))


def l1_loss(pred, gt) -> float:
    """Mean absolute difference over the 8 encoding components."""
    pred = np.asarray(pred, dtype=float).reshape(ENCODING_DIM)
    gt = np.asarray(gt, dtype=float).reshape(ENCODING_DIM)
    return float(np.mean(np.abs(pred - gt)))


def combine(cls_loss: float, reg_loss: float, weights: LossWeights = LossWeights()) -> float:
    return weights.lam * cls_loss + weights.gamma * reg_loss


def total_loss(probs, boxes, gt_labels, gt_boxes, weights: LossWeights = LossWeights(),
               matching: Optional[Sequence[Tuple[int, int]]] = None) -> LossResult:
    """Loss value and gradients w.r.t. every probability and box component.

    Pass ``matching`` to evaluate under a fixed assignment (as the gradient
    check does); otherwise it is computed with ``assign_targets``.
    """
    probs = _check_probs(probs)
    boxes = _check_boxes(boxes, "boxes")
    num_queries, num_cols = probs.shape
    if boxes.shape[0] != num_queries:
        raise ValueError(f"{num_queries} query probability rows but {boxes.shape[0]} boxes")
    labels = _check_labels(gt_labels, num_cols - 1)
    gt_boxes = _check_boxes(gt_boxes, "gt_boxes")
    if len(labels) != gt_boxes.shape[0]:
        raise ValueError("gt_labels and gt_boxes differ in length")
    if matching is None:
        matching = assign_targets(probs, boxes, labels, gt_boxes, weights)
    matching = [(int(q), int(g)) for q, g in matching]

    targets = targets_from_matching(num_queries, num_cols - 1, labels, matching)
    norm = max(1, len(labels))
    rows = np.arange(num_queries)
    p_t = probs[rows, targets]
    alpha_t = np.where(targets == num_cols - 1, 1.0 - weights.focal_alpha, weights.focal_alpha)
    terms, d_terms = focal_terms(p_t, alpha_t, weights.focal_gamma)
    cls = float(terms.sum() / norm)
    grad_probs = np.zeros_like(probs)
    grad_probs[rows, targets] = weights.lam * d_terms / norm

    grad_boxes = np.zeros_like(boxes)
    reg = 0.0
    if matching:
        scale = 1.0 / (ENCODING_DIM * len(matching))
        for q, g in matching:
            diff = boxes[q] - gt_boxes[g]
            reg += float(np.abs(diff).sum()) * scale
            grad_boxes[q] += weights.gamma * np.sign(diff) * scale

    return LossResult(combine(cls, reg, weights), cls, reg, matching, grad_probs, grad_boxes)


def gradient_check(probs, boxes, gt_labels, gt_boxes, weights: LossWeights = LossWeights(),
                   step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    probs = _check_probs(probs)
    boxes = _check_boxes(boxes, "boxes")
    res = total_loss(probs, boxes, gt_labels, gt_boxes, weights)

    def value(p, b):
        return total_loss(p, b, gt_labels, gt_boxes, weights, matching=res.matching).value

    worst = 0.0
    for arr, grad, is_prob in ((probs, res.grad_probs, True), (boxes, res.grad_boxes, False)):
        for idx in np.ndindex(arr.shape):
            plus, minus = arr.copy(), arr.copy()
            plus[idx] += step
            minus[idx] -= step
            if is_prob:
                num = (value(plus, boxes) - value(minus, boxes)) / (2 * step)
            else:
                num = (value(probs, plus) - value(probs, minus)) / (2 * step)
            ana = grad[idx]
            denom = max(abs(ana), abs(num), 1e-12)
            worst = max(worst, abs(ana - num) / denom)
    return worst
