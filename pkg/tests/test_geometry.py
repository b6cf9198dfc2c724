import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gdigrasp.depthscene import CameraModel
from gdigrasp.geometry import (
    GraspRect,
    GripperModel,
    LinePose,
    OutOfBoundsError,
    build_rect,
    corners,
    meters_to_pixels,
    normalize_angle,
)

angles = st.floats(-20.0, 20.0, allow_nan=False)


def test_corners_axis_aligned():
    a, b = corners(LinePose(100, 100, 30, 0.0))
    assert (a, b) == ((115, 100), (85, 100))
    a, b = corners(LinePose(100, 100, 30, math.pi / 2))
    assert a == pytest.approx((100, 115), abs=1e-12)
    assert b == pytest.approx((100, 85), abs=1e-12)


def test_corners_diagonal():
    a, b = corners(LinePose(50, 60, 30, math.pi / 4))
    h = 15 / math.sqrt(2)
    assert a == pytest.approx((50 + h, 60 + h), abs=1e-9)
    assert b == pytest.approx((50 - h, 60 - h), abs=1e-9)
    assert a == pytest.approx((60.607, 70.607), abs=1e-3)


@given(st.floats(0, 640), st.floats(0, 480), st.floats(1, 60), angles)
def test_corners_length_and_pi_involution(x, y, l_v, theta):
    a, b = corners(LinePose(x, y, l_v, theta))
    assert math.dist(a, b) == pytest.approx(l_v, rel=1e-9)
    a2, b2 = corners(LinePose(x, y, l_v, theta + math.pi))
    assert a2 == pytest.approx(b, abs=1e-9)
    assert b2 == pytest.approx(a, abs=1e-9)


def test_line_pose_needs_length():
    with pytest.raises(ValueError):
        LinePose(0, 0, 0, 0)


@given(angles)
def test_normalize_angle_range(t):
    n = normalize_angle(t)
    assert 0 <= n < math.pi
    assert math.sin(2 * n) == pytest.approx(math.sin(2 * t), abs=1e-9)


def test_meters_to_pixels():
    cam = CameraModel()
    assert meters_to_pixels(0.0, 1.7, cam) == 0
    assert meters_to_pixels(0.09, 1.3, cam) == pytest.approx(36.346, abs=1e-3)
    assert meters_to_pixels(0.09, 2.6, cam) * 2 == meters_to_pixels(0.09, 1.3, cam)
    with pytest.raises(ValueError):
        meters_to_pixels(0.1, 0.0, cam)


def test_gripper_defaults_and_validation():
    g = GripperModel()
    assert g.opening == pytest.approx(0.09)
    assert GripperModel.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        GripperModel(max_opening=0.03, opening_fraction=0.5)
    with pytest.raises(ValueError):
        GripperModel(opening_fraction=0)
    with pytest.raises(ValueError):
        GripperModel(side_clearance=-0.01)


def test_build_rect_default_dimensions():
    r = build_rect((320, 240), 0.0, GripperModel(), 1.3, CameraModel())
    assert r.theta == pytest.approx(math.pi / 2)
    assert r.half_length == pytest.approx(26.25)
    assert r.half_width == pytest.approx(12.115, abs=1e-3)


def test_build_rect_wraps_theta():
    r = build_rect((320, 240), math.pi / 2, GripperModel(), 1.3, CameraModel())
    assert r.theta == pytest.approx(0.0, abs=1e-12)


@given(st.floats(-7, 7))
def test_build_rect_phi_plus_pi_identical(phi):
    g, cam = GripperModel(), CameraModel()
    r1 = build_rect((320, 240), phi, g, 1.25, cam)
    r2 = build_rect((320, 240), phi + math.pi, g, 1.25, cam)
    assert r1.half_length == r2.half_length
    assert np.allclose(sorted(map(tuple, r1.vertices())), sorted(map(tuple, r2.vertices())), atol=1e-9)


def test_build_rect_scales_inversely_with_depth():
    g, cam = GripperModel(), CameraModel()
    near = build_rect((320, 240), 0.3, g, 1.0, cam)
    far = build_rect((320, 240), 0.3, g, 2.0, cam)
    assert near.half_length == 2 * far.half_length
    assert near.half_width == 2 * far.half_width


def test_build_rect_out_of_bounds():
    with pytest.raises(OutOfBoundsError):
        build_rect((5, 240), 0.0, GripperModel(), 1.3, CameraModel())
    with pytest.raises(ValueError):
        build_rect((320, 240), 0.0, GripperModel(), 0.0, CameraModel())


def test_grasp_rect_invariants():
    with pytest.raises(ValueError):
        GraspRect(0, 0, 0, 5, 6)
    with pytest.raises(ValueError):
        GraspRect(0, 0, 0, 5, 0)
    r = GraspRect(100, 50, 0.0, 20, 10)
    assert sorted(map(tuple, r.vertices().tolist())) == [(80, 40), (80, 60), (120, 40), (120, 60)]
    assert r.inside_image(200, 100)
    assert not r.inside_image(110, 100)
