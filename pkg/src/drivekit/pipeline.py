"""Dataset construction: fuse expert records, filter, and emit task samples.

Per frame the stages are ``dedup_records`` -> ``itm_filter`` ->
``generate_tasks``, plus ``build_caption_prompts`` for the dense-caption
annotator. All stages are pure functions of (frame, config).
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .config import PipelineConfig, Template
from .geometry import iou_2d
from .model import SURROUND, VIEWS, Box3D, Frame, ObjectRecord, Source, Task, TaskSample
from .prompt_format import format_box_string, normalized_coords

CAPTION_PREAMBLE = (
    "You are given the objects observed around an ego vehicle by its six surround cameras. "
    "Write a detailed description of the driving scene that covers every listed object, "
    "including its location, category, attributes, motion state and distance to the ego vehicle."
)

_VIEW_LABELS = {v: v.replace("_", " ") for v in VIEWS}
_COMMAND_TEXT = {"turn_left": "Turn left", "turn_right": "Turn right", "go_straight": "Go straight"}


def dedup_records(records: Sequence[ObjectRecord], iou_thresh: float = 0.5) -> List[ObjectRecord]:
    """Drop cross-source duplicates within each view.

    Records are visited in (source priority, input position) order; a record
    is dropped when a kept record from another source in the same view
    overlaps it with 2D IoU >= ``iou_thresh``. Records from the same source
    never suppress each other. Output keeps input order.
    """
    order = sorted(range(len(records)), key=lambda i: (records[i].source.priority, i))
    kept: List[int] = []
    for i in order:
        r = records[i]
        clash = any(
            records[k].view == r.view
            and records[k].source is not r.source
            and iou_2d(records[k].box2d, r.box2d) >= iou_thresh
            for k in kept
        )
        if not clash:
            kept.append(i)
    keep = set(kept)
    return [r for i, r in enumerate(records) if i in keep]


def itm_filter(records: Sequence[ObjectRecord], itm_thresh: float = 0.5) -> List[ObjectRecord]:
    """Drop expert records whose image-text matching score is below threshold."""
    return [r for r in records
            if r.source is Source.GROUND_TRUTH or (r.itm_score is not None and r.itm_score >= itm_thresh)]


@dataclass
class FilterStats:
    input_records: int = 0
    dedup_dropped: int = 0
    itm_dropped: int = 0
    degenerate_boxes: int = 0

    def add(self, other: "FilterStats") -> None:
        self.input_records += other.input_records
        self.dedup_dropped += other.dedup_dropped
        self.itm_dropped += other.itm_dropped
        self.degenerate_boxes += other.degenerate_boxes

    def as_dict(self) -> Dict[str, int]:
        return {
            "input_records": self.input_records,
            "dedup_dropped": self.dedup_dropped,
            "itm_dropped": self.itm_dropped,
            "degenerate_boxes_skipped": self.degenerate_boxes,
        }


def filter_frame(frame: Frame, config: PipelineConfig) -> Tuple[Frame, FilterStats]:
    deduped = dedup_records(frame.records, config.dedup_iou_thresh)
    kept = itm_filter(deduped, config.itm_thresh)
    stats = FilterStats(len(frame.records), len(frame.records) - len(deduped), len(deduped) - len(kept))
    return replace(frame, records=tuple(kept)), stats


# ---------------------------------------------------------------------------
# task generation


def template_index(frame_id: str, key: str, task: Task, seed: int, count: int) -> int:
    digest = hashlib.sha256(f"{frame_id}|{key}|{task.value}|{seed}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % count


def _pick(config: PipelineConfig, frame_id: str, key: str, task: Task) -> Template:
    temps = config.templates[task]
    return temps[template_index(frame_id, key, task, config.seed, len(temps))]


def render_attributes(attributes: Sequence[str]) -> str:
    # nuScenes-style "vehicle.moving" -> "moving"
    words = [a.split(".")[-1].replace("_", " ") for a in attributes if a]
    return " and ".join(words) if words else "in an unknown motion state"


def render_boxes3d(boxes: Sequence[Box3D]) -> str:
    return "; ".join(
        f"({b.cx:.2f}, {b.cy:.2f}, {b.cz:.2f}, {b.l:.2f}, {b.w:.2f}, {b.h:.2f}, {b.yaw:.2f})" for b in boxes
    )


def _box_text(record: ObjectRecord, config: PipelineConfig) -> Optional[str]:
    if record.box2d.x2 > config.image_width or record.box2d.y2 > config.image_height:
        raise ValueError(f"{record.object_id}: box2d {record.box2d.as_tuple()} exceeds the "
                         f"{config.image_width:g}x{config.image_height:g} image")
    x1, y1, x2, y2 = normalized_coords(record.box2d, config.image_width, config.image_height)
    if x1 >= x2 or y1 >= y2:
        return None
    return format_box_string((x1, y1, x2, y2))


def _fill(template: Template, values: Dict[str, str]) -> Tuple[str, str]:
    return template.prompt.format(**values), template.answer.format(**values)


def _record_values(r: ObjectRecord, box_text: str) -> Dict[str, str]:
    return {
        "view": _VIEW_LABELS[r.view],
        "category": r.category.replace("_", " "),
        "box2d": box_text,
        "description": r.description or f"the {r.category.replace('_', ' ')}",
        "distance": "unknown" if r.distance is None else f"{r.distance:.1f}",
        "attributes": render_attributes(r.attributes),
        "command": "",
        "boxes3d": "",
        "count": "",
        "caption": "",
    }


def generate_tasks(frame: Frame, config: PipelineConfig, stats: Optional[FilterStats] = None) -> List[TaskSample]:
    """Emit the task samples of one (already filtered) frame.

    Region description and 2D grounding use every record; prediction uses
    GT records only; 3D grounding emits one sample per (view, category) over
    GT boxes; planning emits one sample per frame; a dense-caption sample is
    added when the frame carries a caption.
    """
    samples: List[TaskSample] = []
    counters: Counter = Counter()

    def add(task: Task, view: str, prompt: str, answer: str, **kw) -> None:
        counters[task] += 1
        sid = f"{frame.frame_id}/{task.value}/{counters[task]:04d}"
        samples.append(TaskSample(sid, task, view, prompt, answer, **kw))

    for r in frame.records:
        box_text = _box_text(r, config)
        if box_text is None:
            if stats is not None:
                stats.degenerate_boxes += 1
            continue
        values = _record_values(r, box_text)
        prompt, answer = _fill(_pick(config, frame.frame_id, r.object_id, Task.REGION_DESCRIPTION), values)
        add(Task.REGION_DESCRIPTION, r.view, prompt, answer)
        prompt, answer = _fill(_pick(config, frame.frame_id, r.object_id, Task.VG2D), values)
        add(Task.VG2D, r.view, prompt, answer, target_boxes_2d=(r.box2d,))
        if r.source is Source.GROUND_TRUTH:
            prompt, answer = _fill(_pick(config, frame.frame_id, r.object_id, Task.PREDICTION), values)
            add(Task.PREDICTION, r.view, prompt, answer)

    for view, category, boxes in vg3d_groups(frame, config.categories):
        values = {k: "" for k in ("box2d", "description", "distance", "attributes", "command", "caption")}
        values.update(view=_VIEW_LABELS[view], category=category.replace("_", " "),
                      boxes3d=render_boxes3d(boxes), count=str(len(boxes)))
        prompt, answer = _fill(_pick(config, frame.frame_id, f"{view}/{category}", Task.VG3D), values)
        add(Task.VG3D, view, prompt, answer, target_boxes_3d=tuple(boxes), category=category)

    values = {k: "" for k in ("view", "category", "box2d", "description", "distance", "attributes",
                              "boxes3d", "count", "caption")}
    values["command"] = _COMMAND_TEXT[frame.planning_command]
    prompt, answer = _fill(_pick(config, frame.frame_id, "", Task.PLANNING), values)
    add(Task.PLANNING, SURROUND, prompt, answer)

    if frame.caption:
        values["command"] = ""
        values["caption"] = frame.caption
        prompt, answer = _fill(_pick(config, frame.frame_id, "", Task.DENSE_CAPTION), values)
        add(Task.DENSE_CAPTION, SURROUND, prompt, answer)
    return samples


def vg3d_groups(frame: Frame, categories: Sequence[str]) -> List[Tuple[str, str, List[Box3D]]]:
    """GT 3D boxes grouped by (view, category), in view then category order."""
    rank = {c: i for i, c in enumerate(categories)}
    groups: Dict[Tuple[str, str], List[Box3D]] = {}
    for r in frame.records:
        if r.source is Source.GROUND_TRUTH and r.box3d is not None:
            groups.setdefault((r.view, r.category), []).append(r.box3d)
    keys = sorted(groups, key=lambda k: (VIEWS.index(k[0]), rank.get(k[1], len(rank)), k[1]))
    return [(v, c, groups[(v, c)]) for v, c in keys]


# ---------------------------------------------------------------------------
# dense-caption prompts


@dataclass(frozen=True)
class CaptionPrompt:
    frame_id: str
    prompt: str


def _plain_number(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".")


def _record_line(r: ObjectRecord) -> str:
    distance = "unknown" if r.distance is None else f"{_plain_number(r.distance)} m"
    attrs = ", ".join(r.attributes) if r.attributes else "none"
    desc = r.description or "none"
    x1, y1, x2, y2 = r.box2d.as_tuple()
    return (f"- {r.category} at pixels ({x1:.0f}, {y1:.0f}), ({x2:.0f}, {y2:.0f}); "
            f"distance: {distance}; attributes: {attrs}; description: {desc}")


def build_caption_prompt(frame: Frame) -> CaptionPrompt:
    parts = [CAPTION_PREAMBLE]
    for view in VIEWS:
        lines = [_record_line(r) for r in frame.records if r.view == view]
        if lines:
            parts.append(f"[{_VIEW_LABELS[view]} view]")
            parts.extend(lines)
    return CaptionPrompt(frame.frame_id, "\n".join(parts))


def build_caption_prompts(frames: Iterable[Frame]) -> List[CaptionPrompt]:
    return [build_caption_prompt(f) for f in frames]


def ingest_captions(frames: Sequence[Frame], responses: Iterable[Tuple[str, str]]) -> Tuple[List[Frame], List[str]]:
    """Attach caption texts to frames by id.

    Returns the updated frames (input order) and the response ids that
    matched no frame. A frame id appearing twice in ``responses`` is an error.
    """
    by_id: Dict[str, str] = {}
    for fid, text in responses:
        if fid in by_id:
            raise ValueError(f"duplicate frame_id in caption responses: {fid!r}")
        by_id[fid] = text
    known = {f.frame_id for f in frames}
    skipped = [fid for fid in by_id if fid not in known]
    updated = [replace(f, caption=by_id[f.frame_id]) if f.frame_id in by_id else f for f in frames]
    return updated, skipped


# ---------------------------------------------------------------------------
# whole build


@dataclass
class BuildResult:
    frames: List[Frame]
    samples: List[TaskSample]
    prompts: List[CaptionPrompt]
    stats: FilterStats = field(default_factory=FilterStats)

    def task_counts(self) -> Dict[str, int]:
        counts = Counter(s.task for s in self.samples)
        return {t.value: counts.get(t, 0) for t in Task}


def build_dataset(frames: Sequence[Frame], config: PipelineConfig) -> BuildResult:
    result = BuildResult([], [], [])
    for frame in frames:
        filtered, stats = filter_frame(frame, config)
        result.frames.append(filtered)
        result.samples.extend(generate_tasks(filtered, config, stats))
        result.stats.add(stats)
    result.prompts = build_caption_prompts(result.frames)
    return result
