import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gdigrasp.axis import AxisMode, UnverifiableCentroid, major_axis, moment_sums, rect_for_cluster
from gdigrasp.cluster import Clustering, PointFamily, assign_families, kmeans
from gdigrasp.config import PipelineConfig
from gdigrasp.depthscene import CameraModel, height_map
from gdigrasp.geometry import GripperModel, OutOfBoundsError
from gdigrasp.sampler import corner_balance_mask, object_region_mask, sample_lines
from gdigrasp.synthgen import Box, SceneSpec, render_scene

from conftest import heightmap_from

MODES = list(AxisMode)


def fam(points, idx=0):
    pts = np.asarray(points, dtype=np.float64)
    return PointFamily(idx, pts, tuple(range(len(pts) // 2)))


def pca_angle(points) -> float:
    d = points - points.mean(axis=0)
    w, v = np.linalg.eigh(d.T @ d)
    vx, vy = v[:, -1]
    return math.atan2(vy, vx) % math.pi


def ang_diff(a, b) -> float:
    d = (a - b) % math.pi
    return min(d, math.pi - d)


def anisotropic_cloud(rng, n=400, ratio=4.0):
    phi = rng.uniform(0, math.pi)
    raw = rng.normal(size=(n, 2)) * [ratio, 1.0] * rng.uniform(2, 20)
    c, s = math.cos(phi), math.sin(phi)
    return raw @ np.array([[c, s], [-s, c]]) + rng.uniform(50, 500, 2)


@pytest.mark.parametrize("mode", MODES)
def test_horizontal_segment(mode):
    pts = [(x, 7.0) for x in range(10, 30)]
    r = major_axis(fam(pts), mode)
    assert r.phi == 0 and not r.degenerate


def test_diagonal_line_both_modes():
    pts = [(t, t) for t in range(-10, 11)]
    assert major_axis(fam(pts), AxisMode.CENTRAL_MOMENT).phi == pytest.approx(math.pi / 4)
    assert major_axis(fam(pts), AxisMode.LITERAL_EQ1).phi == pytest.approx(math.pi / 8)


def test_square_corners_are_degenerate():
    r = major_axis(fam([(0, 0), (1, 0), (0, 1), (1, 1)]), AxisMode.CENTRAL_MOMENT)
    assert r.degenerate and r.phi == 0.0


@pytest.mark.parametrize("pts", [[(3, 3)], [(3, 3), (3, 3), (3, 3), (3, 3)]])
def test_single_distinct_point_is_degenerate(pts):
    for mode in MODES:
        r = major_axis(fam(pts), mode)
        assert r.degenerate and r.phi == 0.0


def test_literal_matches_direct_formula():
    rng = np.random.default_rng(2)
    pts = anisotropic_cloud(rng)
    d = pts - pts.mean(axis=0)
    direct = 0.5 * math.atan2(2 * np.sum(d[:, 0] * d[:, 1]), np.sum(d[:, 0] ** 2 + d[:, 1] ** 2))
    assert major_axis(fam(pts), AxisMode.LITERAL_EQ1).phi == pytest.approx(direct % math.pi, abs=1e-12)


def test_pca_agreement():
    rng = np.random.default_rng(9)
    for _ in range(30):
        pts = anisotropic_cloud(rng, n=int(rng.integers(200, 600)), ratio=rng.uniform(3, 8))
        assert ang_diff(major_axis(fam(pts)).phi, pca_angle(pts)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-math.pi, math.pi))
def test_rotation_equivariance(seed, alpha):
    pts = anisotropic_cloud(np.random.default_rng(seed), n=200)
    mu = pts.mean(axis=0)
    c, s = math.cos(alpha), math.sin(alpha)
    rot = (pts - mu) @ np.array([[c, s], [-s, c]]) + mu
    a = major_axis(fam(pts)).phi
    b = major_axis(fam(rot)).phi
    assert ang_diff(b, a + alpha) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-500, 500), st.floats(-500, 500), st.floats(0.1, 10))
def test_translation_and_scale_invariance(seed, tx, ty, k):
    pts = anisotropic_cloud(np.random.default_rng(seed), n=200)
    mu = pts.mean(axis=0)
    for mode in MODES:
        base = major_axis(fam(pts), mode).phi
        assert ang_diff(major_axis(fam(pts + [tx, ty]), mode).phi, base) < 1e-9
        assert ang_diff(major_axis(fam((pts - mu) * k + mu), mode).phi, base) < 1e-9


def test_moment_sums_are_central():
    sxy, sxx, syy = moment_sums([(0, 0), (2, 0), (0, 2), (2, 2)])
    assert (sxy, sxx, syy) == (0.0, 4.0, 4.0)


# -- rect_for_cluster ----------------------------------------------------------


def _one_cluster(center, points):
    cl = Clustering(
        k=1,
        centroids=np.array([center], dtype=np.float64),
        assignment=np.zeros(len(points) // 2, dtype=np.int64),
        inertia=0.0,
        iterations=1,
        inertia_history=(0.0,),
    )
    return cl, fam(points)


def test_phi_zero_gives_vertical_rectangle():
    hm = heightmap_from(np.full((480, 640), 0.05))
    cl, f = _one_cluster((320, 240), [(300, 240), (340, 240)])
    ax = major_axis(f)
    rect = rect_for_cluster(cl, f, ax, hm, GripperModel(), CameraModel())
    assert rect.theta == pytest.approx(math.pi / 2)
    # sized at the box-top depth 1.25 m
    assert rect.half_length == pytest.approx(525 * 0.065 / 1.25)


def test_degenerate_family_falls_back_to_theta_zero(caplog):
    hm = heightmap_from(np.full((480, 640), 0.05))
    cl, f = _one_cluster((320, 240), [(319, 239), (321, 241), (319, 241), (321, 239)])
    ax = major_axis(f)
    assert ax.degenerate
    with caplog.at_level(logging.WARNING):
        rect = rect_for_cluster(cl, f, ax, hm, GripperModel(), CameraModel())
    assert rect.theta == 0.0
    assert "no major axis" in caplog.text


def test_border_centroid_is_out_of_bounds():
    hm = heightmap_from(np.full((480, 640), 0.05))
    cl, f = _one_cluster((8, 240), [(0, 240), (16, 240)])
    with pytest.raises(OutOfBoundsError):
        rect_for_cluster(cl, f, major_axis(f), hm, GripperModel(), CameraModel())


def test_unknown_surface_under_centroid():
    h = np.full((480, 640), 0.05)
    h[230:251, 310:331] = np.nan
    cl, f = _one_cluster((320, 240), [(300, 240), (340, 240)])
    with pytest.raises(UnverifiableCentroid):
        rect_for_cluster(cl, f, major_axis(f), heightmap_from(h), GripperModel(), CameraModel())


def test_elongated_box_at_thirty_degrees():
    cam = CameraModel()
    yaw = math.radians(30)
    img, _ = render_scene(SceneSpec((Box((0.0, 0.0), (0.16, 0.035, 0.05), yaw),)), cam)
    hm = height_map(img, 1.3)
    scfg = PipelineConfig(n_samples=20000, roi=(200, 130, 240, 220)).sampler(640, 480)
    poses = sample_lines(scfg)
    keep = object_region_mask(poses, hm, scfg)
    poses = [p for p, k in zip(poses, keep) if k]
    keep = corner_balance_mask(poses, hm, scfg)
    poses = [p for p, k in zip(poses, keep) if k]
    cl = kmeans(np.array([p.center for p in poses]), 1)
    (f,) = assign_families(cl, poses)
    ax = major_axis(f)
    # image v grows downward like workspace y, so the box axis keeps its yaw
    assert ang_diff(ax.phi, yaw) < math.radians(2)
    rect = rect_for_cluster(cl, f, ax, hm, GripperModel(), cam)
    assert ang_diff(rect.theta, math.radians(120)) < math.radians(2)
