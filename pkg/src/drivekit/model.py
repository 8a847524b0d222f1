"""Shared domain types.

All types are frozen dataclasses that validate their invariants on
construction, so no other module can observe an invalid instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

VIEWS: Tuple[str, ...] = (
    "front_left",
    "front",
    "front_right",
    "back_left",
    "back",
    "back_right",
)
SURROUND = "surround"

COMMANDS: Tuple[str, ...] = ("turn_left", "turn_right", "go_straight")

# nuScenes detection classes.
DEFAULT_CATEGORIES: Tuple[str, ...] = (
    "car",
    "truck",
    "construction_vehicle",
    "bus",
    "trailer",
    "barrier",
    "motorcycle",
    "bicycle",
    "pedestrian",
    "traffic_cone",
)


class ValidationError(ValueError):
    """A value violates a type invariant."""

    def __init__(self, message: str, record_id: Optional[str] = None):
        self.record_id = record_id
        if record_id is not None:
            message = f"{record_id}: {message}"
        super().__init__(message)


class Source(str, Enum):
    """Which expert produced an object record. Declared in priority order."""

    GROUND_TRUTH = "GroundTruth"
    REGION_TO_TEXT = "RegionToText"
    SEG_CAPTION = "SegCaption"

    @property
    def priority(self) -> int:
        # lower is stronger
        return _SOURCE_PRIORITY[self]


_SOURCE_PRIORITY = {s: i for i, s in enumerate(Source)}


class Task(str, Enum):
    DENSE_CAPTION = "DenseCaption"
    REGION_DESCRIPTION = "RegionDescription"
    VG2D = "VG2D"
    PREDICTION = "Prediction"
    PLANNING = "Planning"
    VG3D = "VG3D"


def _finite(name: str, *values: float) -> None:
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(f"{name} must be a finite number, got {v!r}")


def normalize_yaw(yaw: float) -> float:
    """Map an angle to (-pi, pi]."""
    y = math.remainder(yaw, math.tau)
    if y <= -math.pi:
        y += math.tau
    return y


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned image box in pixels, origin top-left."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        _finite("box2d coordinate", self.x1, self.y1, self.x2, self.y2)
        if min(self.x1, self.y1, self.x2, self.y2) < 0:
            raise ValidationError(f"box2d coordinates must be >= 0, got {self.as_tuple()}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValidationError(f"degenerate box2d {self.as_tuple()}: need x1 < x2 and y1 < y2")

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box in the ego frame.

    Centre and size are in meters; ``l`` runs along the heading, ``w``
    across it. ``yaw`` is stored normalized to (-pi, pi].
    """

    cx: float
    cy: float
    cz: float
    l: float
    w: float
    h: float
    yaw: float = 0.0

    def __post_init__(self):
        _finite("box3d field", self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw)
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise ValidationError(f"box3d size must be positive, got l={self.l} w={self.w} h={self.h}")
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))

    @property
    def center(self) -> Tuple[float, float, float]:
        return (self.cx, self.cy, self.cz)

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw)


@dataclass(frozen=True)
class ObjectRecord:
    """One object seen in one camera view by one source."""

    object_id: str
    source: Source
    view: str
    box2d: Box2D
    category: str
    description: str = ""
    attributes: Tuple[str, ...] = ()
    box3d: Optional[Box3D] = None
    distance: Optional[float] = None
    itm_score: Optional[float] = None

    def __post_init__(self):
        rid = self.object_id
        if not self.object_id:
            raise ValidationError("object_id must be nonempty")
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if self.view not in VIEWS:
            raise ValidationError(f"unknown view {self.view!r}", rid)
        if not self.category:
            raise ValidationError("category must be nonempty", rid)
        if self.source is Source.GROUND_TRUTH and (self.box3d is None or self.distance is None):
            raise ValidationError("GroundTruth records need box3d and distance", rid)
        if self.source is not Source.GROUND_TRUTH and self.itm_score is None:
            raise ValidationError(f"{self.source.value} records need itm_score", rid)
        if self.distance is not None:
            _finite("distance", self.distance)
            if self.distance < 0:
                raise ValidationError(f"distance must be >= 0, got {self.distance}", rid)
        if self.itm_score is not None:
            _finite("itm_score", self.itm_score)
            if not 0.0 <= self.itm_score <= 1.0:
                raise ValidationError(f"itm_score must be in [0, 1], got {self.itm_score}", rid)


@dataclass(frozen=True)
class Frame:
    """One timestamp of one scene: six camera images and their objects."""

    scene_id: str
    frame_id: str
    images: Tuple[Tuple[str, str], ...]
    planning_command: str
    records: Tuple[ObjectRecord, ...] = ()
    caption: Optional[str] = None

    def __post_init__(self):
        fid = self.frame_id
        if not self.frame_id:
            raise ValidationError("frame_id must be nonempty")
        images = dict(self.images)
        if sorted(images) != sorted(VIEWS) or len(images) != len(tuple(self.images)):
            raise ValidationError(f"frame must reference exactly the six views {VIEWS}, got {sorted(images)}", fid)
        # canonical view order
        object.__setattr__(self, "images", tuple((v, images[v]) for v in VIEWS))
        object.__setattr__(self, "records", tuple(self.records))
        if self.planning_command not in COMMANDS:
            raise ValidationError(f"planning_command must be one of {COMMANDS}, got {self.planning_command!r}", fid)

    @property
    def image_paths(self) -> dict:
        return dict(self.images)


def _check_target_boxes(task: Task, boxes_3d, boxes_2d, sid: str) -> None:
    if (task is Task.VG3D) != bool(boxes_3d):
        raise ValidationError("target_boxes_3d must be nonempty iff task is VG3D", sid)
    if (task is Task.VG2D) != bool(boxes_2d):
        raise ValidationError("target_boxes_2d must be nonempty iff task is VG2D", sid)


@dataclass(frozen=True)
class TaskSample:
    """One generated image-language pair.

    ``category`` is set for VG3D samples so category-wise mAP can be
    computed against them.
    """

    sample_id: str
    task: Task
    view: str
    prompt: str
    answer: str
    target_boxes_3d: Tuple[Box3D, ...] = ()
    target_boxes_2d: Tuple[Box2D, ...] = ()
    category: Optional[str] = None

    def __post_init__(self):
        sid = self.sample_id
        if not sid:
            raise ValidationError("sample_id must be nonempty")
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "target_boxes_3d", tuple(self.target_boxes_3d))
        object.__setattr__(self, "target_boxes_2d", tuple(self.target_boxes_2d))
        if self.view != SURROUND and self.view not in VIEWS:
            raise ValidationError(f"unknown view {self.view!r}", sid)
        if not self.prompt or not self.answer:
            raise ValidationError("prompt and answer must be nonempty", sid)
        _check_target_boxes(self.task, self.target_boxes_3d, self.target_boxes_2d, sid)


def _check_confidence(c: float) -> None:
    _finite("confidence", c)
    if not 0.0 <= c <= 1.0:
        raise ValidationError(f"confidence must be in [0, 1], got {c}")


@dataclass(frozen=True)
class ScoredBox3D:
    box: Box3D
    category: str
    confidence: float = 1.0

    def __post_init__(self):
        _check_confidence(self.confidence)


@dataclass(frozen=True)
class ScoredBox2D:
    """A predicted 2D box in the normalized [0, 1000) coordinate space."""

    box: Box2D
    confidence: float = 1.0

    def __post_init__(self):
        _check_confidence(self.confidence)


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    text: Optional[str] = None
    boxes_3d: Tuple[ScoredBox3D, ...] = field(default_factory=tuple)
    boxes_2d: Tuple[ScoredBox2D, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.sample_id:
            raise ValidationError("sample_id must be nonempty")
        object.__setattr__(self, "boxes_3d", tuple(self.boxes_3d))
        object.__setattr__(self, "boxes_2d", tuple(self.boxes_2d))
