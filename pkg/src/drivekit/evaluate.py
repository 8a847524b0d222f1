"""Score a prediction file against generated task samples."""

from __future__ import annotations

import re
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

from .config import Config
from .grounding import (
    f1_3d_scenes,
    map_3d_scenes,
    normalize_command,
    planning_accuracy,
    pr_at_k_scenes,
    vg2d_metrics_scenes,
)
from .lang import TokenizedPair, bleu, cider, rescale_cider, rouge_l
from .model import Box2D, Box3D, Prediction, ScoredBox3D, Task, TaskSample, ValidationError
from .prompt_format import NORM_RANGE, UnscorableOutput, normalized_coords, parse_box2d_string

LANGUAGE_TASKS = (Task.DENSE_CAPTION, Task.REGION_DESCRIPTION, Task.PREDICTION)

_NUM = r"(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
_BOX3D_RE = re.compile(r"\(\s*" + r"\s*,\s*".join([_NUM] * 7) + r"\s*\)")


def parse_box3d_list(text: Optional[str]) -> List[Box3D]:
    """Extract every ``(cx, cy, cz, l, w, h, yaw)`` tuple with positive sizes."""
    out = []
    for m in _BOX3D_RE.finditer(text or ""):
        vals = [float(g) for g in m.groups()]
        try:
            out.append(Box3D(*vals))
        except ValidationError:
            continue
    return out


def gt_box_normalized(box: Box2D, image_w: float, image_h: float) -> Box2D:
    """GT pixel box in the integer [0, 1000) space model outputs use."""
    x1, y1, x2, y2 = normalized_coords(box, image_w, image_h)
    if x2 <= x1:
        x1, x2 = (x1, x1 + 1) if x1 < NORM_RANGE - 1 else (x1 - 1, x1)
    if y2 <= y1:
        y1, y2 = (y1, y1 + 1) if y1 < NORM_RANGE - 1 else (y1 - 1, y1)
    return Box2D(float(x1), float(y1), float(x2), float(y2))


def _index_predictions(predictions: Sequence[Prediction]) -> Dict[str, Prediction]:
    by_id: Dict[str, Prediction] = {}
    for p in predictions:
        if p.sample_id in by_id:
            raise ValueError(f"duplicate prediction for sample_id {p.sample_id!r}")
        by_id[p.sample_id] = p
    return by_id


def report_metadata() -> Dict[str, str]:
    return {
        "pr_distance": "xyz centre distance, Hungarian matching",
        "map_distance": "bev centre distance, confidence-greedy matching, 101-point AP",
        "f1_3d_matching": "Hungarian on 1 - IoU3D, TP when IoU > threshold",
        "vg2d_space": "normalized integer coordinates in [0, 1000)",
        "vg2d_map": "COCO IoU 0.50:0.05:0.95, 101-point AP",
        "bleu": "corpus-level, clipped n-gram precision, brevity penalty",
        "rouge_l": "LCS F-measure, best reference",
        "cider_variant": "CIDEr-D",
        "cider_rescale": "log10(cider + 1)",
        "missing_predictions": "scored as empty outputs",
    }


def evaluate(samples: Sequence[TaskSample], predictions: Sequence[Prediction], config: Config) -> dict:
    """Build the evaluation report document."""
    ev = config.eval
    width, height = config.pipeline.image_width, config.pipeline.image_height
    by_id = _index_predictions(predictions)
    sample_ids = {s.sample_id for s in samples}
    unknown = sorted(pid for pid in by_id if pid not in sample_ids)

    grouped: Dict[Task, List[Tuple[TaskSample, Optional[Prediction]]]] = defaultdict(list)
    for s in samples:
        grouped[s.task].append((s, by_id.get(s.sample_id)))

    tasks: Dict[str, dict] = {}
    total_missing = 0
    for task in Task:
        items = grouped.get(task)
        if not items:
            continue
        missing = sum(1 for _, p in items if p is None)
        total_missing += missing
        section: Dict[str, object] = {"samples": len(items), "missing": missing}
        if task in LANGUAGE_TASKS:
            section.update(_language_section(items, config))
        elif task is Task.VG2D:
            section.update(_vg2d_section(items, width, height, ev.f1_iou_thresh_2d))
        elif task is Task.VG3D:
            section.update(_vg3d_section(items, config))
        elif task is Task.PLANNING:
            preds = [p.text if p is not None else None for _, p in items]
            gts = [normalize_command(s.answer) for s, _ in items]
            section["accuracy"] = planning_accuracy(preds, gts)
        tasks[task.value] = section

    return {
        "config": {
            "categories": list(config.pipeline.categories),
            "image": {"width": width, "height": height},
            "eval": {
                "pr_ks": list(ev.pr_ks),
                "map_dist_thresh": ev.map_dist_thresh,
                "f1_iou_thresh_3d": ev.f1_iou_thresh_3d,
                "f1_iou_thresh_2d": ev.f1_iou_thresh_2d,
                "bleu_max_n": ev.bleu_max_n,
                "bleu_smoothing": ev.bleu_smoothing,
                "rouge_beta": ev.rouge_beta,
                "cider_max_n": ev.cider_max_n,
                "cider_sigma": ev.cider_sigma,
            },
        },
        "metadata": report_metadata(),
        "counts": {
            "samples": len(samples),
            "predictions": len(predictions),
            "missing": total_missing,
            "unknown_prediction_ids": len(unknown),
        },
        "unknown_prediction_ids": unknown,
        "tasks": tasks,
    }


def _language_section(items, config: Config) -> dict:
    ev = config.eval
    pairs = [TokenizedPair.from_text(p.text if p is not None else None, [s.answer]) for s, p in items]
    raw = cider(pairs, ev.cider_max_n, ev.cider_sigma)
    return {
        "bleu": bleu(pairs, ev.bleu_max_n, ev.bleu_smoothing),
        "rouge_l": rouge_l(pairs, ev.rouge_beta),
        "cider_raw": raw,
        "cider": rescale_cider(raw),
    }


def _vg2d_section(items, width: float, height: float, f1_thresh: float) -> dict:
    scenes = []
    unscorable = 0
    for s, p in items:
        gts = [gt_box_normalized(b, width, height) for b in s.target_boxes_2d]
        preds: List[Tuple[Box2D, float]] = []
        if p is not None and p.boxes_2d:
            preds = [(b.box, b.confidence) for b in p.boxes_2d]
        elif p is not None:
            try:
                preds = [(parse_box2d_string(p.text), 1.0)]
            except UnscorableOutput:
                unscorable += 1
        scenes.append((preds, gts))
    res = vg2d_metrics_scenes(scenes, f1_thresh)
    return {"unscorable": unscorable, "map": res.map, "f1": res.f1, "miou": res.miou}


def _vg3d_boxes(s: TaskSample, p: Optional[Prediction]) -> List[ScoredBox3D]:
    if p is None:
        return []
    if p.boxes_3d:
        return list(p.boxes_3d)
    return [ScoredBox3D(b, s.category or "", 1.0) for b in parse_box3d_list(p.text)]


def _vg3d_section(items, config: Config) -> dict:
    ev = config.eval
    box_scenes = []
    cat_scenes = []
    for s, p in items:
        preds = _vg3d_boxes(s, p)
        gts = list(s.target_boxes_3d)
        box_scenes.append(([b.box for b in preds], gts))
        pred_by_cat: Dict[str, list] = defaultdict(list)
        for b in preds:
            pred_by_cat[b.category].append((b.box, b.confidence))
        cat_scenes.append((dict(pred_by_cat), {s.category or "": gts}))
    pr = pr_at_k_scenes(box_scenes, ev.pr_ks)
    f1 = f1_3d_scenes(box_scenes, ev.f1_iou_thresh_3d)
    return {
        "pr": pr.mean,
        "pr_at_k": {f"{k:g}": v for k, v in pr.per_k.items()},
        "map": map_3d_scenes(cat_scenes, ev.map_dist_thresh),
        "f1": f1.f1,
        "precision": f1.precision,
        "recall": f1.recall,
    }


def predictions_from_answers(samples: Sequence[TaskSample]) -> List[Prediction]:
    """Oracle predictions that copy every answer (and its target boxes)."""
    preds = []
    for s in samples:
        boxes_3d = tuple(ScoredBox3D(b, s.category or "", 1.0) for b in s.target_boxes_3d)
        preds.append(Prediction(s.sample_id, s.answer, boxes_3d))
    return preds
