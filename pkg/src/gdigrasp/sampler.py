"""Uniform line-pose sampling and the two-level height filter."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .depthscene import HeightMap, pixel_index, robust_z_many
from .geometry import LinePose, corners_array


class SamplerConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    roi: tuple[int, int, int, int]  # (u0, v0, width, height) in pixels
    n_samples: int = 5000
    l_v: float = 30.0
    margin: float = 0.025
    corner_imbalance_max: float = 0.015
    seed: int = 0
    z_window: int = 3

    def __post_init__(self):
        if self.n_samples <= 0:
            raise SamplerConfigError("n_samples must be positive")
        if self.l_v <= 0 or self.margin <= 0 or self.corner_imbalance_max <= 0:
            raise SamplerConfigError("l_v, margin and corner_imbalance_max must be positive")
        if self.z_window < 1 or self.z_window % 2 == 0:
            raise SamplerConfigError("z_window must be a positive odd integer")
        object.__setattr__(self, "roi", tuple(int(r) for r in self.roi))


def _as_arrays(poses: Sequence[LinePose]):
    if not poses:
        e = np.empty(0)
        return e, e, e, e
    arr = np.array([(p.x_c, p.y_c, p.l_v, p.theta) for p in poses], dtype=np.float64)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def sample_lines(cfg: SamplerConfig) -> list[LinePose]:
    """Draw ``n_samples`` poses with uniform centers and orientations.

    Centers come from the roi shrunk by ``l_v / 2`` on every side, so both
    corners of every pose stay inside the roi at any angle.
    """
    u0, v0, w, h = cfg.roi
    half = cfg.l_v / 2
    # pixel indices span [u0, u0 + w - 1]; corners must round into that range
    lo_u, hi_u = u0 + half, u0 + w - 1 - half
    lo_v, hi_v = v0 + half, v0 + h - 1 - half
    if min(w, h) <= cfg.l_v or hi_u < lo_u or hi_v < lo_v:
        raise SamplerConfigError(
            f"roi {cfg.roi} too small for lines of length {cfg.l_v} px"
        )
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(lo_u, hi_u, cfg.n_samples)
    y = rng.uniform(lo_v, hi_v, cfg.n_samples)
    theta = rng.uniform(0.0, math.pi, cfg.n_samples)
    return [LinePose(float(a), float(b), float(cfg.l_v), float(t)) for a, b, t in zip(x, y, theta)]


def object_region_mask(poses: Sequence[LinePose], hm: HeightMap, cfg: SamplerConfig) -> np.ndarray:
    """Boolean keep-mask of the level-1 (palm above the workspace) test.

    A pose survives when both the windowed median height and the height of
    the center pixel itself exceed the margin. The median alone can be pulled
    above the margin by surrounding objects at a concave gap between them.
    """
    x, y, _, _ = _as_arrays(poses)
    if x.size == 0:
        return np.zeros(0, dtype=bool)
    z = robust_z_many(hm, x, y, cfg.z_window)
    direct = robust_z_many(hm, x, y, 1)
    with np.errstate(invalid="ignore"):
        return (z > cfg.margin) & (direct > cfg.margin)


def corner_balance_mask(poses: Sequence[LinePose], hm: HeightMap, cfg: SamplerConfig) -> np.ndarray:
    x, y, l_v, theta = _as_arrays(poses)
    if x.size == 0:
        return np.zeros(0, dtype=bool)
    a, b = corners_array(x, y, l_v, theta)
    za = robust_z_many(hm, a[:, 0], a[:, 1], cfg.z_window)
    zb = robust_z_many(hm, b[:, 0], b[:, 1], cfg.z_window)
    with np.errstate(invalid="ignore"):
        # NaN on either side compares False, so unknown corners are rejected
        return np.abs(za - zb) <= cfg.corner_imbalance_max


def filter_object_region(poses: Sequence[LinePose], hm: HeightMap, cfg: SamplerConfig) -> list[LinePose]:
    keep = object_region_mask(poses, hm, cfg)
    return [p for p, k in zip(poses, keep) if k]


def filter_corner_balance(poses: Sequence[LinePose], hm: HeightMap, cfg: SamplerConfig) -> list[LinePose]:
    keep = corner_balance_mask(poses, hm, cfg)
    return [p for p, k in zip(poses, keep) if k]


def center_pixels(poses: Sequence[LinePose]) -> np.ndarray:
    x, y, _, _ = _as_arrays(poses)
    return np.stack([pixel_index(x), pixel_index(y)], axis=-1)
