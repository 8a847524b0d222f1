"""Seeded synthetic frames for tests, demos and smoke runs.

Each frame gets a handful of GT objects plus expert records, some of which
duplicate GT boxes (so dedup has work to do) and some with low ITM scores
(so the filter has work to do). Floats are rounded to 3 decimals, so frames
are already in canonical serialized form.
"""

from __future__ import annotations

import math
import random
from typing import List, Sequence

from .model import COMMANDS, DEFAULT_CATEGORIES, VIEWS, Box2D, Box3D, Frame, ObjectRecord, Source

IMAGE_W, IMAGE_H = 1600.0, 900.0

_COLORS = ("white", "black", "red", "silver", "blue", "grey")
_ATTRS = ("vehicle.moving", "vehicle.parked", "vehicle.stopped", "pedestrian.moving",
          "pedestrian.standing", "cycle.with_rider", "turning_left", "turning_right")
_EXTRA_NAMES = ("traffic light", "tree", "building", "lamp post", "road sign")


def _r(x: float) -> float:
    return round(x, 3)


def _box2d(rng: random.Random) -> Box2D:
    w = rng.uniform(40, 400)
    h = rng.uniform(40, 300)
    x1 = rng.uniform(0, IMAGE_W - w)
    y1 = rng.uniform(0, IMAGE_H - h)
    return Box2D(_r(x1), _r(y1), _r(min(IMAGE_W, x1 + w)), _r(min(IMAGE_H, y1 + h)))


def _jitter(box: Box2D, rng: random.Random, frac: float) -> Box2D:
    w, h = box.x2 - box.x1, box.y2 - box.y1
    dx, dy = rng.uniform(-frac, frac) * w, rng.uniform(-frac, frac) * h
    x1 = min(max(0.0, box.x1 + dx), IMAGE_W - w)
    y1 = min(max(0.0, box.y1 + dy), IMAGE_H - h)
    return Box2D(_r(x1), _r(y1), _r(x1 + w), _r(y1 + h))


def _box3d(rng: random.Random) -> Box3D:
    return Box3D(_r(rng.uniform(-40, 40)), _r(rng.uniform(-40, 40)), _r(rng.uniform(-1, 1)),
                 _r(rng.uniform(0.5, 5)), _r(rng.uniform(0.5, 2.5)), _r(rng.uniform(1, 3)),
                 _r(rng.uniform(-3.14, 3.14)))


def synthetic_frame(rng: random.Random, index: int, categories: Sequence[str] = DEFAULT_CATEGORIES,
                    caption: bool = False) -> Frame:
    frame_id = f"frame-{index:05d}"
    records: List[ObjectRecord] = []
    n_gt = rng.randint(0, 6)
    for k in range(n_gt):
        cat = rng.choice(categories)
        b3 = _box3d(rng)
        records.append(ObjectRecord(
            object_id=f"{frame_id}-gt{k}",
            source=Source.GROUND_TRUTH,
            view=rng.choice(VIEWS),
            box2d=_box2d(rng),
            category=cat,
            description=f"a {rng.choice(_COLORS)} {cat.replace('_', ' ')}",
            attributes=tuple(rng.sample(_ATTRS, rng.randint(0, 2))),
            box3d=b3,
            distance=_r(math.hypot(b3.cx, b3.cy)),
        ))
    gts = list(records)
    for k in range(rng.randint(0, 5)):
        src = rng.choice((Source.REGION_TO_TEXT, Source.SEG_CAPTION))
        if gts and rng.random() < 0.4:
            # re-detection of a GT object
            base = rng.choice(gts)
            view, box, cat = base.view, _jitter(base.box2d, rng, 0.05), base.category
        else:
            view, box, cat = rng.choice(VIEWS), _box2d(rng), rng.choice(categories)
        records.append(ObjectRecord(
            object_id=f"{frame_id}-{src.value.lower()}{k}",
            source=src,
            view=view,
            box2d=box,
            category=cat,
            description=f"a {rng.choice(_COLORS)} {rng.choice(_EXTRA_NAMES)} near a {cat.replace('_', ' ')}",
            attributes=(),
            itm_score=_r(rng.random()),
        ))
    rng.shuffle(records)
    images = tuple((v, f"samples/{v.upper()}/{frame_id}.jpg") for v in VIEWS)
    text = None
    if caption:
        text = (f"The ego vehicle is driving with {n_gt} annotated objects nearby. "
                f"A {rng.choice(_COLORS)} car is ahead and the road is {rng.choice(('busy', 'quiet', 'wet'))}.")
    return Frame(
        scene_id=f"scene-{index // 10:04d}",
        frame_id=frame_id,
        images=images,
        planning_command=rng.choice(COMMANDS),
        records=tuple(records),
        caption=text,
    )


def synthetic_frames(n: int, seed: int = 0, categories: Sequence[str] = DEFAULT_CATEGORIES,
                     caption_every: int = 0) -> List[Frame]:
    """``n`` frames from a seeded RNG; every ``caption_every``-th gets a caption."""
    rng = random.Random(seed)
    return [synthetic_frame(rng, i, categories, caption=bool(caption_every) and i % caption_every == 0)
            for i in range(n)]
