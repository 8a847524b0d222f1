"""Detection-style grounding metrics.

3D grounding is scored three ways: Pr@k (Hungarian matching on centre
distance, fraction of GTs within k meters), nuScenes-style mAP (greedy
confidence-ordered matching on BEV centre distance) and F1 (Hungarian on
1 - IoU, TP when IoU exceeds a threshold). 2D grounding gets mIoU, F1 and
COCO-style mAP. Every ``*_scenes`` variant pools counts over many samples;
the single-scene functions are thin wrappers.

Empty conventions: no GT and no predictions scores 1 everywhere; no GT but
some predictions scores 0.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .assignment import hungarian
from .geometry import center_distance, iou_2d, iou_3d
from .model import COMMANDS, Box2D, Box3D

DEFAULT_KS: Tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
COCO_IOU_THRESHOLDS: Tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

Scored3D = Tuple[Box3D, float]
Scored2D = Tuple[Box2D, float]


@dataclass(frozen=True)
class PrAtKResult:
    per_k: Dict[float, float]
    mean: float


@dataclass(frozen=True)
class F1Result:
    precision: float
    recall: float
    f1: float

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1))


# ---------------------------------------------------------------------------
# Pr@k


def _pr_hits(preds: Sequence[Box3D], gts: Sequence[Box3D], ks: Sequence[float]) -> List[int]:
    if not preds or not gts:
        return [0] * len(ks)
    cost = [[center_distance(p, g, "xyz") for g in gts] for p in preds]
    pairs, _ = hungarian(cost)
    dists = [cost[i][j] for i, j in pairs]
    return [sum(d < k for d in dists) for k in ks]


def pr_at_k_scenes(scenes: Iterable[Tuple[Sequence[Box3D], Sequence[Box3D]]],
                   ks: Sequence[float] = DEFAULT_KS) -> PrAtKResult:
    """Pool Pr@k over scenes: total matched-within-k over total GT count."""
    ks = tuple(float(k) for k in ks)
    if any(k <= 0 for k in ks) or list(ks) != sorted(ks):
        raise ValueError(f"ks must be positive and sorted, got {ks}")
    hits = [0] * len(ks)
    n_gt = n_pred = 0
    for preds, gts in scenes:
        n_gt += len(gts)
        n_pred += len(preds)
        for i, h in enumerate(_pr_hits(preds, gts, ks)):
            hits[i] += h
    if n_gt == 0:
        val = 1.0 if n_pred == 0 else 0.0
        per_k = {k: val for k in ks}
    else:
        per_k = {k: h / n_gt for k, h in zip(ks, hits)}
    return PrAtKResult(per_k, sum(per_k.values()) / len(ks))


def pr_at_k(preds: Sequence[Box3D], gts: Sequence[Box3D], ks: Sequence[float] = DEFAULT_KS) -> PrAtKResult:
    return pr_at_k_scenes([(preds, gts)], ks)


# ---------------------------------------------------------------------------
# average precision


def interpolated_ap(matches: Sequence[Tuple[float, bool]], n_gt: int) -> float:
    """101-point interpolated AP from (confidence, is_tp) detections.

    Detections are ranked by descending confidence; ties keep input order.
    """
    if n_gt == 0:
        return 1.0 if not matches else 0.0
    if not matches:
        return 0.0
    conf = np.array([m[0] for m in matches], dtype=float)
    order = np.argsort(-conf, kind="stable")
    tp = np.array([bool(matches[i][1]) for i in order], dtype=float)
    tp_cum = np.cumsum(tp)
    recall = tp_cum / n_gt
    precision = tp_cum / np.arange(1, len(tp) + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(np.mean(sampled))


def match_center_greedy(preds: Sequence[Scored3D], gts: Sequence[Box3D],
                        dist_thresh: float) -> List[Tuple[float, bool]]:
    """nuScenes matching: by descending confidence, take the nearest free GT."""
    order = sorted(range(len(preds)), key=lambda i: -preds[i][1])
    taken = [False] * len(gts)
    out: List[Tuple[float, bool]] = [(0.0, False)] * len(preds)
    for i in order:
        box, conf = preds[i]
        best, best_d = -1, float("inf")
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            d = center_distance(box, g, "bev")
            if d < best_d:
                best, best_d = j, d
        if best >= 0 and best_d < dist_thresh:
            taken[best] = True
            out[i] = (conf, True)
        else:
            out[i] = (conf, False)
    return out


def average_precision_3d(preds: Sequence[Scored3D], gts: Sequence[Box3D], dist_thresh: float = 0.5) -> float:
    if dist_thresh <= 0:
        raise ValueError("dist_thresh must be positive")
    return interpolated_ap(match_center_greedy(preds, gts, dist_thresh), len(gts))


def map_3d_scenes(scenes: Iterable[Tuple[Mapping[str, Sequence[Scored3D]], Mapping[str, Sequence[Box3D]]]],
                  dist_thresh: float = 0.5) -> float:
    """Mean over GT categories of AP pooled across scenes.

    Each scene is ``(preds_by_category, gts_by_category)``.
    """
    matches: Dict[str, List[Tuple[float, bool]]] = {}
    n_gt: Dict[str, int] = {}
    any_pred = False
    for preds_by_cat, gts_by_cat in scenes:
        cats = set(preds_by_cat) | set(gts_by_cat)
        for cat in sorted(cats):
            preds = list(preds_by_cat.get(cat, ()))
            gts = list(gts_by_cat.get(cat, ()))
            any_pred = any_pred or bool(preds)
            n_gt[cat] = n_gt.get(cat, 0) + len(gts)
            matches.setdefault(cat, []).extend(match_center_greedy(preds, gts, dist_thresh))
    gt_cats = sorted(c for c, n in n_gt.items() if n > 0)
    if not gt_cats:
        return 0.0 if any_pred else 1.0
    return float(np.mean([interpolated_ap(matches[c], n_gt[c]) for c in gt_cats]))


def map_3d(preds_by_cat: Mapping[str, Sequence[Scored3D]], gts_by_cat: Mapping[str, Sequence[Box3D]],
           dist_thresh: float = 0.5) -> float:
    return map_3d_scenes([(preds_by_cat, gts_by_cat)], dist_thresh)


# ---------------------------------------------------------------------------
# F1


def _f1_from_counts(tp: int, n_pred: int, n_gt: int) -> F1Result:
    if n_pred == 0 and n_gt == 0:
        return F1Result(1.0, 1.0, 1.0)
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f1 = 0.0 if tp == 0 else 2 * precision * recall / (precision + recall)
    return F1Result(precision, recall, f1)


def _hungarian_iou_matches(iou_matrix: List[List[float]]) -> List[float]:
    if not iou_matrix or not iou_matrix[0]:
        return []
    pairs, _ = hungarian([[1.0 - x for x in row] for row in iou_matrix])
    return [iou_matrix[i][j] for i, j in pairs]


def f1_3d_scenes(scenes: Iterable[Tuple[Sequence[Box3D], Sequence[Box3D]]], iou_thresh: float = 0.25) -> F1Result:
    if not 0.0 < iou_thresh < 1.0:
        raise ValueError(f"iou_thresh must be in (0, 1), got {iou_thresh}")
    tp = n_pred = n_gt = 0
    for preds, gts in scenes:
        n_pred += len(preds)
        n_gt += len(gts)
        ious = _hungarian_iou_matches([[iou_3d(p, g) for g in gts] for p in preds])
        tp += sum(x > iou_thresh for x in ious)
    return _f1_from_counts(tp, n_pred, n_gt)


def f1_3d(preds: Sequence[Box3D], gts: Sequence[Box3D], iou_thresh: float = 0.25) -> F1Result:
    return f1_3d_scenes([(preds, gts)], iou_thresh)


# ---------------------------------------------------------------------------
# 2D grounding


@dataclass(frozen=True)
class VG2DResult:
    map: float
    f1: float
    miou: float

    def __iter__(self):
        return iter((self.map, self.f1, self.miou))


def _match_iou_greedy(preds: Sequence[Scored2D], gts: Sequence[Box2D], thresh: float) -> List[Tuple[float, bool]]:
    # COCO: by descending score, best-IoU free GT with IoU >= thresh
    order = sorted(range(len(preds)), key=lambda i: -preds[i][1])
    taken = [False] * len(gts)
    out: List[Tuple[float, bool]] = [(0.0, False)] * len(preds)
    for i in order:
        box, conf = preds[i]
        best, best_iou = -1, thresh
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            iou = iou_2d(box, g)
            if iou >= best_iou:
                best, best_iou = j, iou
        if best >= 0:
            taken[best] = True
        out[i] = (conf, best >= 0)
    return out


def vg2d_metrics_scenes(scenes: Iterable[Tuple[Sequence[Scored2D], Sequence[Box2D]]],
                        f1_iou_thresh: float = 0.5,
                        iou_thresholds: Sequence[float] = COCO_IOU_THRESHOLDS) -> VG2DResult:
    scenes = [(list(p), list(g)) for p, g in scenes]
    n_gt = sum(len(g) for _, g in scenes)
    n_pred = sum(len(p) for p, _ in scenes)
    if n_gt == 0:
        val = 1.0 if n_pred == 0 else 0.0
        return VG2DResult(val, val, val)

    iou_sum = 0.0
    tp = 0
    for preds, gts in scenes:
        ious = _hungarian_iou_matches([[iou_2d(b, g) for g in gts] for b, _ in preds])
        iou_sum += sum(ious)
        tp += sum(x > f1_iou_thresh for x in ious)
    miou = iou_sum / n_gt
    f1 = _f1_from_counts(tp, n_pred, n_gt).f1

    aps = []
    for t in iou_thresholds:
        matches: List[Tuple[float, bool]] = []
        for preds, gts in scenes:
            matches.extend(_match_iou_greedy(preds, gts, t))
        aps.append(interpolated_ap(matches, n_gt))
    return VG2DResult(float(np.mean(aps)), f1, miou)


def vg2d_metrics(preds: Sequence[Scored2D], gts: Sequence[Box2D], f1_iou_thresh: float = 0.5) -> VG2DResult:
    """(mAP, F1, mIoU) for one image's predictions against its GT boxes."""
    return vg2d_metrics_scenes([(preds, gts)], f1_iou_thresh)


# ---------------------------------------------------------------------------
# planning

_STRIP = str.maketrans("", "", string.punctuation.replace("_", ""))


def normalize_command(text: str | None) -> str:
    """'Turn Left.' -> 'turn_left'."""
    if not text:
        return ""
    t = text.lower().strip().translate(_STRIP)
    return "_".join(t.replace("_", " ").split())


def planning_accuracy(pred_commands: Sequence[str | None], gt_commands: Sequence[str]) -> float:
    if len(pred_commands) != len(gt_commands):
        raise ValueError(f"length mismatch: {len(pred_commands)} predictions vs {len(gt_commands)} targets")
    if not gt_commands:
        return 1.0
    for g in gt_commands:
        if normalize_command(g) not in COMMANDS:
            raise ValueError(f"unknown planning command {g!r}")
    correct = sum(normalize_command(p) == normalize_command(g) for p, g in zip(pred_commands, gt_commands))
    return correct / len(gt_commands)
