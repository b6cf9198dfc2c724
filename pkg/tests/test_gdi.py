import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gdigrasp.depthscene import CameraModel, height_map
from gdigrasp.gdi import (
    GdiConfig,
    GdiConfigError,
    GdiScore,
    PeripheryMode,
    RankingMode,
    UnverifiableCandidate,
    gdi_score,
    periphery_pixels,
    rank_grasps,
)
from gdigrasp.geometry import GraspRect
from gdigrasp.synthgen import Box, SceneSpec, render_scene

from conftest import heightmap_from, px_to_xy


def loop_band(rect: GraspRect, band: float) -> set:
    """Pixel-by-pixel rasterization of the two finger-end strips."""
    out = set()
    c, s = math.cos(rect.theta), math.sin(rect.theta)
    r = int(rect.half_length + rect.half_width) + 2
    for v in range(int(rect.y_c) - r, int(rect.y_c) + r + 1):
        for u in range(int(rect.x_c) - r, int(rect.x_c) + r + 1):
            a = abs((u - rect.x_c) * c + (v - rect.y_c) * s)
            w = abs(-(u - rect.x_c) * s + (v - rect.y_c) * c)
            if rect.half_length - band + 1e-9 < a <= rect.half_length + 1e-9 and w <= rect.half_width + 1e-9:
                out.add((u, v))
    return out


def as_set(pix) -> set:
    return set(map(tuple, np.asarray(pix).tolist()))


def test_axis_aligned_band_count():
    rect = GraspRect(100, 100, 0.0, 26, 12)
    pix = periphery_pixels(rect, 4)
    # |a| in {23..26} on both ends, |w| in {-12..12}
    assert len(pix) == 2 * 4 * 25 == 200
    assert as_set(pix) == loop_band(rect, 4)
    mirrored = {(200 - u, 200 - v) for u, v in as_set(pix)}
    assert mirrored == as_set(pix)
    assert (100, 100) not in as_set(pix)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(50, 550),
    st.floats(50, 400),
    st.floats(0, math.pi - 1e-9),
    st.floats(14, 34),
    st.floats(6, 13.5),
    st.floats(1, 5.9),
)
def test_band_matches_loop_oracle_and_pi_symmetry(x, y, theta, hl, hw, band):
    rect = GraspRect(x, y, theta, hl, hw)
    pix = as_set(periphery_pixels(rect, band))
    assert pix == loop_band(rect, band)
    flipped = GraspRect(x, y, theta + math.pi, hl, hw)
    assert as_set(periphery_pixels(flipped, band)) == pix
    assert (round(x), round(y)) not in pix or abs(hl) < band


def test_band_too_wide():
    with pytest.raises(GdiConfigError):
        periphery_pixels(GraspRect(100, 100, 0.0, 26, 12), 12)


def test_perimeter_mode_is_superset():
    rect = GraspRect(100, 100, 0.5, 26, 12)
    ends = as_set(periphery_pixels(rect, 4))
    ring = as_set(periphery_pixels(rect, 4, PeripheryMode.PERIMETER))
    assert ends < ring


# -- gdi_score ---------------------------------------------------------------------


def _box_scene(extra=()):
    cam = CameraModel()
    objs = (Box((0.0, 0.0), (0.1, 0.035, 0.05)),) + tuple(extra)
    img, truth = render_scene(SceneSpec(objs), cam)
    return height_map(img, 1.3), truth


def test_lone_box_all_free():
    hm, _ = _box_scene()
    rect = GraspRect(320, 240, math.pi / 2, 27.3, 12.6)  # across the 0.035 m side
    s = gdi_score(rect, hm)
    assert s.max_deviation == pytest.approx(0.05)
    assert s.positive_fraction == 1.0
    assert s.positive_count == s.n_pixels == len(periphery_pixels(rect, 4))
    assert not s.colliding


def test_taller_neighbor_collides():
    # neighbor 0.08 m tall just below the box, covering one finger band
    y = px_to_xy(320, 240 + 24)[1]
    hm, _ = _box_scene([Box((0.0, y), (0.1, 0.02, 0.08))])
    rect = GraspRect(320, 240, math.pi / 2, 27.3, 12.6)
    s = gdi_score(rect, hm)
    assert s.colliding
    pix = periphery_pixels(rect, 4)
    dev = s.palm_height - hm.as_array()[pix[:, 1], pix[:, 0]]
    assert dev.min() == pytest.approx(-0.03)


def test_flat_plane_zero_deviation():
    s = gdi_score(GraspRect(320, 240, 0.3, 27, 12), heightmap_from(np.zeros((480, 640))))
    assert s.max_deviation == 0 and s.positive_count == 0 and not s.colliding


def test_unknown_palm_and_unknown_band():
    h = np.zeros((480, 640))
    h[235:246, 315:326] = np.nan
    with pytest.raises(UnverifiableCandidate):
        gdi_score(GraspRect(320, 240, 0.0, 27, 12), heightmap_from(h))
    h = np.full((480, 640), 0.0)
    h[240, 345] = np.nan
    s = gdi_score(GraspRect(320, 240, 0.0, 27, 12), heightmap_from(h))
    assert s.colliding


def test_rect_leaving_image_counts_unknown():
    s = gdi_score(GraspRect(10, 240, 0.0, 27, 12), heightmap_from(np.zeros((480, 640))))
    assert s.colliding


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.5, 0.5), st.integers(0, 2**32 - 1))
def test_constant_offset_invariance(offset, seed):
    rng = np.random.default_rng(seed)
    h = rng.uniform(0, 0.1, (120, 160))
    rects = [GraspRect(rng.uniform(50, 110), rng.uniform(45, 75), rng.uniform(0, math.pi), 27, 12) for _ in range(4)]
    a = [gdi_score(r, heightmap_from(h), cluster_index=i) for i, r in enumerate(rects)]
    b = [gdi_score(r, heightmap_from(h + offset), cluster_index=i) for i, r in enumerate(rects)]
    for x, y in zip(a, b):
        assert x.positive_count == y.positive_count and x.colliding == y.colliding
        assert x.max_deviation == pytest.approx(y.max_deviation, abs=1e-9)
    assert [r.cluster_index for r in rank_grasps(a)] == [r.cluster_index for r in rank_grasps(b)]


def test_threshold_monotonicity():
    rng = np.random.default_rng(5)
    hm = heightmap_from(rng.uniform(0, 0.06, (200, 200)))
    rect = GraspRect(100, 100, 0.4, 27, 12)
    counts = [gdi_score(rect, hm, GdiConfig(clearance_min=c)).positive_count for c in (0, 0.005, 0.01, 0.03)]
    assert counts == sorted(counts, reverse=True)
    flags = [gdi_score(rect, hm, GdiConfig(collision_tol=t)).colliding for t in (0.1, 0.05, 0.02, 0.0)]
    assert flags == sorted(flags)


def test_config_validation():
    for kw in ({"band": 0}, {"top_n": 0}, {"min_positive_fraction": 1.5}, {"ranking_mode": "best"}):
        with pytest.raises((GdiConfigError, ValueError)):
            GdiConfig(**kw)


# -- rank_grasps -----------------------------------------------------------------------


def score(idx, frac, mx, colliding=False):
    rect = GraspRect(100, 100, 0.0, 27, 12)
    return GdiScore(rect, 100, mx, int(frac * 100), frac, colliding, 0.05, idx)


def test_single_candidate():
    (r,) = rank_grasps([score(3, 0.5, 0.02)])
    assert (r.rank, r.cluster_index) == (1, 3)


def test_modes_disagree_on_constructed_pair():
    a, b = score(0, 1.0, 0.04), score(1, 0.6, 0.09)
    assert [r.cluster_index for r in rank_grasps([a, b])] == [0, 1]
    assert [r.cluster_index for r in rank_grasps([a, b], mode=RankingMode.EQ2_MAX)] == [1, 0]


def test_all_colliding_is_empty():
    assert rank_grasps([score(0, 1.0, 0.05, True), score(1, 1.0, 0.04, True)]) == []
    assert rank_grasps([]) == []


def test_top_n_ties_and_floor():
    scores = [score(i, 0.8, 0.03) for i in (4, 2, 7, 0, 5, 6, 1)]
    ranked = rank_grasps(scores, top_n=5)
    assert [r.cluster_index for r in ranked] == [0, 1, 2, 4, 5]
    assert [r.rank for r in ranked] == [1, 2, 3, 4, 5]
    assert rank_grasps(scores, min_positive_fraction=0.9) == []
    assert len(rank_grasps(scores + [score(9, 0.95, 0.01)], min_positive_fraction=0.9)) == 1
