import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivekit.geometry import bev_intersection_area, center_distance, clip_convex, iou_2d, iou_3d, polygon_area
from drivekit.model import Box2D, Box3D

from oracles import mc_iou_3d


def cube(cx=0.0, cy=0.0, cz=0.0, yaw=0.0, l=1.0, w=1.0, h=1.0):
    return Box3D(cx, cy, cz, l, w, h, yaw)


def test_iou_2d_examples():
    a = Box2D(0, 0, 2, 2)
    assert iou_2d(a, a) == 1.0
    assert iou_2d(a, Box2D(5, 5, 6, 6)) == 0.0
    assert iou_2d(a, Box2D(1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-12)
    assert iou_2d(a, Box2D(2, 0, 4, 2)) == 0.0


def test_bev_area_examples():
    assert bev_intersection_area(cube(), cube()) == pytest.approx(1.0, abs=1e-12)
    assert bev_intersection_area(cube(), cube(yaw=math.pi / 4)) == pytest.approx(2 * (math.sqrt(2) - 1), abs=1e-12)
    assert bev_intersection_area(cube(), cube(cx=10.0)) == 0.0


def test_iou_3d_examples():
    assert iou_3d(cube(), cube()) == pytest.approx(1.0, abs=1e-12)
    assert iou_3d(cube(), cube(cx=0.5)) == pytest.approx(1 / 3, abs=1e-12)
    assert iou_3d(cube(), cube(yaw=math.pi / 4)) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert iou_3d(cube(), cube(cz=2.0)) == 0.0


def test_center_distance_examples():
    a = cube()
    assert center_distance(a, a) == 0.0
    assert center_distance(a, cube(cx=3, cy=4)) == pytest.approx(5.0, abs=1e-15)
    assert center_distance(a, cube(cz=2), mode="bev") == 0.0
    with pytest.raises(ValueError):
        center_distance(a, a, mode="xz")


def test_clip_convex_square_halves():
    sq = [(0, 0), (2, 0), (2, 2), (0, 2)]
    shifted = [(1, 0), (3, 0), (3, 2), (1, 2)]
    assert polygon_area(clip_convex(sq, shifted)) == pytest.approx(2.0)
    assert polygon_area(sq) == pytest.approx(4.0)


def test_touching_boxes_are_zero():
    assert bev_intersection_area(cube(), cube(cx=1.0)) == 0.0
    assert iou_3d(cube(), cube(cz=1.0)) == 0.0


box3d = st.builds(
    Box3D,
    st.floats(-10, 10), st.floats(-10, 10), st.floats(-2, 2),
    st.floats(0.2, 5), st.floats(0.2, 5), st.floats(0.2, 3),
    st.floats(-math.pi, math.pi),
)


@settings(max_examples=300, deadline=None)
@given(box3d, box3d)
def test_symmetry_and_bounds(a, b):
    assert bev_intersection_area(a, b) == bev_intersection_area(b, a)
    assert iou_3d(a, b) == iou_3d(b, a)
    assert 0.0 <= iou_3d(a, b) <= 1.0
    assert center_distance(a, b) == center_distance(b, a)
    assert 0.0 <= bev_intersection_area(a, b) <= min(a.l * a.w, b.l * b.w) + 1e-12


def _rotate(box, theta):
    c, s = math.cos(theta), math.sin(theta)
    return Box3D(c * box.cx - s * box.cy, s * box.cx + c * box.cy, box.cz, box.l, box.w, box.h, box.yaw + theta)


@settings(max_examples=300, deadline=None)
@given(box3d, box3d, st.floats(-2 * math.pi, 2 * math.pi))
def test_rotation_equivariance(a, b, theta):
    ra, rb = _rotate(a, theta), _rotate(b, theta)
    assert bev_intersection_area(ra, rb) == pytest.approx(bev_intersection_area(a, b), abs=1e-9)
    assert iou_3d(ra, rb) == pytest.approx(iou_3d(a, b), abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(box3d, box3d)
def test_yaw_half_turn_invariance(a, b):
    flipped = Box3D(a.cx, a.cy, a.cz, a.l, a.w, a.h, a.yaw + math.pi)
    assert iou_3d(flipped, b) == pytest.approx(iou_3d(a, b), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(box3d)
def test_identity_and_half_turn_give_one(a):
    assert iou_3d(a, a) == pytest.approx(1.0, abs=1e-12)
    assert iou_3d(a, Box3D(a.cx, a.cy, a.cz, a.l, a.w, a.h, a.yaw + math.pi)) == pytest.approx(1.0, abs=1e-9)


def test_octagon_matches_monte_carlo():
    rng = np.random.default_rng(5)
    est = mc_iou_3d(cube(), cube(yaw=math.pi / 4), 400_000, rng)
    assert est == pytest.approx(1 / math.sqrt(2), abs=3e-3)


def test_monte_carlo_oracle_small():
    # the full 200-pair, 10^6-sample run lives in the acceptance suite
    rng = np.random.default_rng(17)
    for _ in range(20):
        a = Box3D(*rng.uniform(-1, 1, 3), *rng.uniform(1, 4, 3), rng.uniform(-math.pi, math.pi))
        b = Box3D(*(np.array([a.cx, a.cy, a.cz]) + rng.uniform(-1.5, 1.5, 3)), *rng.uniform(1, 4, 3),
                  rng.uniform(-math.pi, math.pi))
        assert abs(iou_3d(a, b) - mc_iou_3d(a, b, 200_000, rng)) < 5e-3
