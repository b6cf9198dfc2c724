"""Binary PPM visualization of one planning run.

Depth is drawn in grayscale (near = bright, missing = black). Retained line
poses are red with green finger dots. The ranked rectangles are outlined in
cyan, with the rank-1 rectangle in yellow. Rank ``r`` carries ``r`` short
ticks at its first vertex.
"""
from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .depthscene import DepthImage, pixel_index
from .geometry import GraspRect, corners
from .pipeline import PipelineResult

RED = (255, 0, 0)
GREEN = (0, 255, 0)
CYAN = (0, 200, 255)
YELLOW = (255, 255, 0)


def depth_to_gray(img: DepthImage) -> np.ndarray:
    depth = img.as_array()
    valid = img.valid
    gray = np.zeros(depth.shape, dtype=np.uint8)
    if valid.any():
        lo, hi = depth[valid].min(), depth[valid].max()
        span = hi - lo if hi > lo else 1.0
        # 40..255 keeps the farthest valid surface distinct from missing pixels
        gray[valid] = np.rint(255 - (depth[valid] - lo) / span * 215).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


def segment_pixels(p0, p1) -> np.ndarray:
    """Integer pixels on the segment p0-p1, one per unit step of the longer axis."""
    (u0, v0), (u1, v1) = p0, p1
    n = int(math.ceil(max(abs(u1 - u0), abs(v1 - v0)))) + 1
    t = np.linspace(0.0, 1.0, n)
    return np.unique(
        np.stack([pixel_index(u0 + t * (u1 - u0)), pixel_index(v0 + t * (v1 - v0))], axis=1),
        axis=0,
    )


def rect_outline_pixels(rect: GraspRect) -> np.ndarray:
    verts = rect.vertices()
    edges = [segment_pixels(verts[i], verts[(i + 1) % 4]) for i in range(4)]
    return np.unique(np.concatenate(edges), axis=0)


def _put(canvas: np.ndarray, pix: np.ndarray, color) -> None:
    h, w = canvas.shape[:2]
    pix = np.asarray(pix).reshape(-1, 2)
    ok = (pix[:, 0] >= 0) & (pix[:, 0] < w) & (pix[:, 1] >= 0) & (pix[:, 1] < h)
    canvas[pix[ok, 1], pix[ok, 0]] = color


def _rank_ticks(rect: GraspRect, rank: int) -> np.ndarray:
    corner = rect.vertices()[0]
    along, across = rect.axes
    ticks = []
    for i in range(rank):
        base = corner + along * (2.0 + 3.0 * i)
        ticks.append(segment_pixels(base, base + across * 4.0))
    return np.concatenate(ticks)


def render_overlay(img: DepthImage, result: PipelineResult) -> np.ndarray:
    canvas = depth_to_gray(img)
    for pose in result.retained:
        a, b = corners(pose)
        _put(canvas, segment_pixels(a, b), RED)
        _put(canvas, np.array([pixel_index(a), pixel_index(b)]), GREEN)
    # draw lower ranks first so rank 1 stays on top
    for ranked in sorted(result.ranked, key=lambda r: -r.rank):
        rect = ranked.score.rect
        color = YELLOW if ranked.rank == 1 else CYAN
        _put(canvas, rect_outline_pixels(rect), color)
        _put(canvas, _rank_ticks(rect, ranked.rank), color)
    return canvas


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    h, w = rgb.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


_PPM_HEADER = re.compile(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s")


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = _PPM_HEADER.match(data)
    if m is None:
        raise ValueError(f"{path}: not a binary PPM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data[m.end() : m.end() + w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def emit_overlay(img: DepthImage, result: PipelineResult, path: str | Path) -> Path:
    path = Path(path)
    write_ppm(path, render_overlay(img, result))
    return path
