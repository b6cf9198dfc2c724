"""Grasp Decide Index: finger-band clearance scoring and top-N ranking.

Heights here are above the workspace, so a finger-band pixel with
``deviation = palm_height - pixel_height > 0`` is lower than the palm, i.e.
free space for the finger to descend into. In raw camera depth the same
number is ``depth_pixel - depth_palm``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .depthscene import HeightMap, robust_z
from .geometry import GraspRect

_EDGE_EPS = 1e-9


class RankingMode(str, enum.Enum):
    CLEARANCE_COUNT = "clearance_count"
    EQ2_MAX = "eq2_max"


class PeripheryMode(str, enum.Enum):
    FINGER_ENDS = "finger_ends"
    PERIMETER = "perimeter"


class GdiConfigError(ValueError):
    pass


class UnverifiableCandidate(ValueError):
    """The palm-center height of a rectangle is unknown."""


@dataclass(frozen=True)
class GdiConfig:
    band: float = 4.0
    clearance_min: float = 0.005
    collision_tol: float = 0.015
    ranking_mode: RankingMode = RankingMode.CLEARANCE_COUNT
    top_n: int = 5
    periphery: PeripheryMode = PeripheryMode.FINGER_ENDS
    z_window: int = 3
    # 0 keeps every non-colliding candidate; 1 demands a fully clear band
    min_positive_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ranking_mode", RankingMode(self.ranking_mode))
        object.__setattr__(self, "periphery", PeripheryMode(self.periphery))
        if self.band <= 0:
            raise GdiConfigError("band must be positive")
        if self.top_n < 1:
            raise GdiConfigError("top_n must be at least 1")
        if not 0.0 <= self.min_positive_fraction <= 1.0:
            raise GdiConfigError("min_positive_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class GdiScore:
    rect: GraspRect
    n_pixels: int
    max_deviation: float
    positive_count: int
    positive_fraction: float
    colliding: bool
    palm_height: float = math.nan
    cluster_index: int = 0


@dataclass(frozen=True)
class RankedGrasp:
    rank: int
    score: GdiScore
    cluster_index: int


def periphery_pixels(
    rect: GraspRect,
    band: float,
    mode: PeripheryMode | str = PeripheryMode.FINGER_ENDS,
) -> np.ndarray:
    """Integer (u, v) pixels inside ``rect`` and within ``band`` of its edge.

    ``finger_ends`` keeps only the two strips at the ends of the opening
    direction, where the fingers descend: ``half_length - band < |a| <=
    half_length`` with ``a`` the offset along theta. ``perimeter`` keeps the
    band along all four sides. Rows are sorted by (v, u).
    """
    mode = PeripheryMode(mode)
    if not band < min(rect.half_length, rect.half_width):
        raise GdiConfigError(
            f"band {band} must be narrower than the rectangle half-sizes "
            f"({rect.half_length:.2f}, {rect.half_width:.2f})"
        )
    verts = rect.vertices()
    u0, v0 = np.floor(verts.min(axis=0)).astype(int)
    u1, v1 = np.ceil(verts.max(axis=0)).astype(int)
    vv, uu = np.mgrid[v0 : v1 + 1, u0 : u1 + 1]
    a, w = rect.local_coords(uu, vv)
    a, w = np.abs(a), np.abs(w)
    inside = (a <= rect.half_length + _EDGE_EPS) & (w <= rect.half_width + _EDGE_EPS)
    end_strip = a > rect.half_length - band + _EDGE_EPS
    if mode is PeripheryMode.FINGER_ENDS:
        keep = inside & end_strip
    else:
        side_strip = w > rect.half_width - band + _EDGE_EPS
        keep = inside & (end_strip | side_strip)
    return np.stack([uu[keep], vv[keep]], axis=1)


def gdi_score(rect: GraspRect, hm: HeightMap, cfg: GdiConfig = GdiConfig(), cluster_index: int = 0) -> GdiScore:
    palm = robust_z(hm, rect.center, cfg.z_window)
    if math.isnan(palm):
        raise UnverifiableCandidate(f"unknown palm height at {rect.center}")
    pix = periphery_pixels(rect, cfg.band, cfg.periphery)
    in_image = (
        (pix[:, 0] >= 0) & (pix[:, 0] < hm.width) & (pix[:, 1] >= 0) & (pix[:, 1] < hm.height)
    )
    heights = np.full(len(pix), np.nan)
    heights[in_image] = hm.as_array()[pix[in_image, 1], pix[in_image, 0]]
    dev = palm - heights
    known = ~np.isnan(dev)
    n = len(pix)
    positive = int(np.count_nonzero(dev[known] > cfg.clearance_min))
    colliding = bool((~known).any() or (dev[known] < -cfg.collision_tol).any())
    return GdiScore(
        rect=rect,
        n_pixels=n,
        max_deviation=float(np.max(dev[known])) if known.any() else math.nan,
        positive_count=positive,
        positive_fraction=positive / n if n else 0.0,
        colliding=colliding,
        palm_height=palm,
        cluster_index=cluster_index,
    )


def _sort_key(score: GdiScore, mode: RankingMode):
    if mode is RankingMode.EQ2_MAX:
        return (-score.max_deviation, score.cluster_index)
    return (-score.positive_fraction, -score.max_deviation, score.cluster_index)


def rank_grasps(
    scores: Sequence[GdiScore],
    top_n: int = 5,
    mode: RankingMode | str = RankingMode.CLEARANCE_COUNT,
    min_positive_fraction: float = 0.0,
) -> list[RankedGrasp]:
    """Drop colliding candidates and rank the rest, best first.

    Candidates whose clear share of band pixels falls below
    ``min_positive_fraction`` are dropped as well.

    ``clearance_count`` orders by the share of clear finger-band pixels, then
    by the largest deviation. ``eq2_max`` orders by the largest deviation
    alone. Ties go to the lower cluster index.
    """
    mode = RankingMode(mode)
    feasible = [
        s for s in scores if not s.colliding and s.positive_fraction >= min_positive_fraction
    ]
    feasible.sort(key=lambda s: _sort_key(s, mode))
    return [
        RankedGrasp(rank=i + 1, score=s, cluster_index=s.cluster_index)
        for i, s in enumerate(feasible[:top_n])
    ]
