"""Exact geometry kernels for 2D/3D boxes.

Rotated footprints are intersected with Sutherland-Hodgman clipping of one
convex polygon against another.
"""

from __future__ import annotations

import math
from typing import List, Sequence, Tuple

from .model import Box2D, Box3D

Point = Tuple[float, float]

COLLINEAR_TOL = 1e-9
SLIVER_AREA = 1e-12


def iou_2d(a: Box2D, b: Box2D) -> float:
    """Intersection over union of two axis-aligned boxes."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def bev_corners(box: Box3D) -> List[Point]:
    """Footprint corners in counterclockwise order."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    hl, hw = box.l / 2.0, box.w / 2.0
    out = []
    for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        out.append((box.cx + c * dx - s * dy, box.cy + s * dx + c * dy))
    return out


def polygon_area(poly: Sequence[Point]) -> float:
    """Signed shoelace area; positive for counterclockwise vertices."""
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def clip_convex(subject: Sequence[Point], clip: Sequence[Point]) -> List[Point]:
    """Clip ``subject`` by the convex counterclockwise polygon ``clip``.

    Points within ``COLLINEAR_TOL`` of a clip edge count as inside. Returns
    the (possibly empty) intersection polygon.
    """
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        scale = math.hypot(ex, ey)
        if scale == 0.0:
            continue

        def side(p: Point) -> float:
            # signed distance to the edge line; > 0 is inside for CCW clip
            return (ex * (p[1] - ay) - ey * (p[0] - ax)) / scale

        inputs, output = output, []
        prev = inputs[-1]
        d_prev = side(prev)
        for cur in inputs:
            d_cur = side(cur)
            if d_cur >= -COLLINEAR_TOL:
                if d_prev < -COLLINEAR_TOL:
                    output.append(_cross_point(prev, cur, d_prev, d_cur))
                output.append(cur)
            elif d_prev >= -COLLINEAR_TOL:
                output.append(_cross_point(prev, cur, d_prev, d_cur))
            prev, d_prev = cur, d_cur
    return output


def _cross_point(p: Point, q: Point, dp: float, dq: float) -> Point:
    t = dp / (dp - dq)
    t = min(1.0, max(0.0, t))
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    """Area (m^2) of the overlap of the two yaw-rotated footprints."""
    if b.as_tuple() < a.as_tuple():
        a, b = b, a  # bit-exact symmetry
    dx, dy = a.cx - b.cx, a.cy - b.cy
    reach = 0.5 * (math.hypot(a.l, a.w) + math.hypot(b.l, b.w))
    if dx * dx + dy * dy > reach * reach:
        return 0.0
    # work relative to a's centre so distant boxes keep their precision
    ra = bev_corners(Box3D(0.0, 0.0, 0.0, a.l, a.w, a.h, a.yaw))
    rb = bev_corners(Box3D(-dx, -dy, 0.0, b.l, b.w, b.h, b.yaw))
    area = polygon_area(clip_convex(ra, rb))
    if area < SLIVER_AREA:
        return 0.0
    return min(area, a.l * a.w, b.l * b.w)


def vertical_overlap(a: Box3D, b: Box3D) -> float:
    lo = max(a.cz - a.h / 2.0, b.cz - b.h / 2.0)
    hi = min(a.cz + a.h / 2.0, b.cz + b.h / 2.0)
    return max(0.0, hi - lo)


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU of two oriented boxes (yaw about the vertical axis)."""
    dz = vertical_overlap(a, b)
    if dz <= 0.0:
        return 0.0
    inter = bev_intersection_area(a, b) * dz
    if inter <= 0.0:
        return 0.0
    union = a.volume + b.volume - inter
    return min(1.0, max(0.0, inter / union))


def center_distance(a: Box3D, b: Box3D, mode: str = "xyz") -> float:
    """L2 distance between box centres over (x, y, z) or, in ``bev`` mode, (x, y)."""
    if mode == "xyz":
        return math.sqrt((a.cx - b.cx) ** 2 + (a.cy - b.cy) ** 2 + (a.cz - b.cz) ** 2)
    if mode == "bev":
        return math.hypot(a.cx - b.cx, a.cy - b.cy)
    raise ValueError(f"unknown distance mode {mode!r}; expected 'xyz' or 'bev'")
