"""Unified model input format: surround-view prompt and 2D box strings."""

from __future__ import annotations

import math
import re
from typing import Optional

from .model import Box2D, Task

PROMPT_FORMAT_VERSION = "1"

IMAGE_TOKEN = "<image>"
EMBEDDING_TOKEN = "<embedding>"

SURROUND_PROMPT = (
    "The <image> <image> <image> <image> <image> <image> present an overview of the "
    "surrounding scene of ego vehicles, sequentially from the front left, front, front "
    "right, back left, back, and back right perspectives of the ego vehicle"
)
VG3D_SUFFIX = ". The referred objects are localized in 3D through <embedding>"

NORM_RANGE = 1000

_BOX_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*,\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)")


class UnscorableOutput(ValueError):
    """Model output holds no parseable box; scored as a miss."""


def quantize(value: float, extent: float) -> int:
    """Map a pixel coordinate to the integer range [0, 999]."""
    q = math.floor(value / extent * NORM_RANGE)
    return min(NORM_RANGE - 1, max(0, q))


def normalize_box2d(box: Box2D, image_w: float, image_h: float) -> str:
    """Render ``box`` as ``"(X_tl, Y_tl), (X_br, Y_br)"`` in [0, 1000) units.

    Raises:
        ValueError: if the box extends outside the image.
    """
    if image_w <= 0 or image_h <= 0:
        raise ValueError(f"image size must be positive, got {image_w}x{image_h}")
    if box.x2 > image_w or box.y2 > image_h:
        raise ValueError(f"box {box.as_tuple()} lies outside a {image_w}x{image_h} image")
    return format_box_string(normalized_coords(box, image_w, image_h))


def normalized_coords(box: Box2D, image_w: float, image_h: float):
    return (quantize(box.x1, image_w), quantize(box.y1, image_h),
            quantize(box.x2, image_w), quantize(box.y2, image_h))


def format_box_string(coords) -> str:
    x1, y1, x2, y2 = coords
    return f"({x1}, {y1}), ({x2}, {y2})"


def build_surround_prompt(task: Task) -> str:
    task = Task(task)
    if task is Task.VG3D:
        return SURROUND_PROMPT + VG3D_SUFFIX
    return SURROUND_PROMPT


def parse_box2d_string(text: Optional[str]) -> Box2D:
    """Extract the first ``(a, b), (c, d)`` box from free-form text.

    The returned box lives in normalized [0, 1000) space. Raises
    ``UnscorableOutput`` when no valid box is present.
    """
    if not text:
        raise UnscorableOutput("empty output")
    for m in _BOX_RE.finditer(text):
        x1, y1, x2, y2 = (int(g) for g in m.groups())
        if max(x1, y1, x2, y2) >= NORM_RANGE or x1 >= x2 or y1 >= y2:
            continue
        return Box2D(float(x1), float(y1), float(x2), float(y2))
    raise UnscorableOutput(f"no box found in {text[:60]!r}")


def compose_model_input(task: Task, question: str) -> str:
    """Prefix a task question with the surround-view prompt."""
    return f"{build_surround_prompt(task)}. {question}"
