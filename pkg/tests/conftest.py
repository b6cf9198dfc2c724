import numpy as np
import pytest

from gdigrasp.depthscene import CameraModel, DepthImage, HeightMap, height_map
from gdigrasp.synthgen import Box, SceneSpec, render_scene


@pytest.fixture
def cam():
    return CameraModel()


def heightmap_from(heights, background=1.3) -> HeightMap:
    """HeightMap whose valid pixels carry exactly ``heights`` (NaN = missing)."""
    h = np.asarray(heights, dtype=np.float64)
    depth = np.where(np.isnan(h), 0.0, background - np.nan_to_num(h))
    img = DepthImage.from_array(depth)
    return height_map(img, background)


def flat_heightmap(width=640, height=480, background=1.3) -> HeightMap:
    return heightmap_from(np.zeros((height, width)), background)


def render(objects, cam=None, **kw):
    return render_scene(SceneSpec(tuple(objects), **kw), cam or CameraModel())


def px_to_xy(u, v, cam=None, depth=1.3):
    """Workspace (x, y) in meters under pixel (u, v) on the plane."""
    cam = cam or CameraModel()
    return ((u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy)


@pytest.fixture
def lone_box(cam):
    spec = SceneSpec((Box((0.0, 0.0), (0.15, 0.04, 0.05), 0.0),))
    img, truth = render_scene(spec, cam)
    return spec, img, truth
