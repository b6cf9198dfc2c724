"""The five-stage grasp planner: sample, filter, cluster, assign axes, score."""
from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .axis import AxisResult, UnverifiableCentroid, major_axis, rect_for_cluster
from .cluster import Clustering, PointFamily, assign_families, kmeans
from .config import PipelineConfig
from .depthscene import CameraModel, DepthImage, HeightMap, estimate_background, height_map
from .gdi import GdiScore, RankedGrasp, UnverifiableCandidate, gdi_score, rank_grasps
from .geometry import LinePose, OutOfBoundsError
from .sampler import corner_balance_mask, object_region_mask, sample_lines

log = logging.getLogger(__name__)

STAGES = ("background", "sample", "filter", "cluster", "axis", "gdi")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    background_depth: float
    n_sampled: int = 0
    n_level1: int = 0
    n_level2: int = 0
    retained: list[LinePose] = field(default_factory=list)
    clustering: Optional[Clustering] = None
    families: list[PointFamily] = field(default_factory=list)
    axes: list[AxisResult] = field(default_factory=list)
    scores: list[GdiScore] = field(default_factory=list)
    ranked: list[RankedGrasp] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    timings_ms: dict[str, float] = field(default_factory=dict)

    @property
    def selected(self) -> Optional[RankedGrasp]:
        return self.ranked[0] if self.ranked else None

    def grasps_json(self) -> dict:
        """Diffable output document; excludes timings so it is reproducible."""
        return {
            "grasps": [grasp_to_dict(r) for r in self.ranked],
            "message": "ok" if self.ranked else "no feasible grasp",
            "counts": {
                "sampled": self.n_sampled,
                "level1": self.n_level1,
                "level2": self.n_level2,
                "clusters": len(self.families),
                "scored": len(self.scores),
            },
            "background_depth_m": self.background_depth,
            "notes": list(self.notes),
        }


def grasp_to_dict(r: RankedGrasp) -> dict:
    rect = r.score.rect
    return {
        "rank": r.rank,
        "center_px": [rect.x_c, rect.y_c],
        "theta_rad": rect.theta,
        "half_length_px": rect.half_length,
        "half_width_px": rect.half_width,
        "gdi": {
            "max_deviation_m": r.score.max_deviation,
            "positive_fraction": r.score.positive_fraction,
        },
        "cluster": r.cluster_index,
    }


@contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = (time.perf_counter() - t0) * 1e3


def plan_on_heightmap(
    hm: HeightMap,
    cam: CameraModel,
    config: PipelineConfig,
    result: PipelineResult,
) -> PipelineResult:
    t = result.timings_ms
    with _stage("sample", t):
        scfg = config.sampler(hm.width, hm.height)
        poses = sample_lines(scfg)
        result.n_sampled = len(poses)

    with _stage("filter", t):
        keep1 = object_region_mask(poses, hm, scfg)
        level1 = [p for p, k in zip(poses, keep1) if k]
        keep2 = corner_balance_mask(level1, hm, scfg)
        retained = [p for p, k in zip(level1, keep2) if k]
        result.n_level1, result.n_level2 = len(level1), len(retained)
        result.retained = retained
    if not retained:
        result.notes.append("no poses survived filtering")
        return result

    with _stage("cluster", t):
        centers = np.array([p.center for p in retained])
        clustering = kmeans(
            centers,
            config.k,
            seed=config.seed,
            max_iter=config.kmeans_max_iter,
            tol=config.kmeans_tol_px2,
            n_init=config.kmeans_n_init,
        )
        result.clustering = clustering
        result.families = assign_families(clustering, retained)

    g = config.gripper.build()
    gcfg = config.gdi()
    rects = []
    with _stage("axis", t):
        for fam in result.families:
            ax = major_axis(fam, config.axis_mode)
            result.axes.append(ax)
            if ax.degenerate:
                result.notes.append(f"cluster {fam.cluster_index}: degenerate axis, theta set to 0")
            try:
                rects.append((fam.cluster_index, rect_for_cluster(clustering, fam, ax, hm, g, cam, config.z_window)))
            except (OutOfBoundsError, UnverifiableCentroid) as exc:
                result.notes.append(f"cluster {fam.cluster_index}: dropped ({exc})")

    with _stage("gdi", t):
        for idx, rect in rects:
            try:
                result.scores.append(gdi_score(rect, hm, gcfg, cluster_index=idx))
            except UnverifiableCandidate as exc:
                result.notes.append(f"cluster {idx}: dropped ({exc})")
        result.ranked = rank_grasps(result.scores, gcfg.top_n, gcfg.ranking_mode, gcfg.min_positive_fraction)
    return result


def run_pipeline(img: DepthImage, cam: CameraModel, config: PipelineConfig = PipelineConfig()) -> PipelineResult:
    """Plan grasps on one depth image. Deterministic for a fixed config."""
    timings: dict[str, float] = {}
    with _stage("background", timings):
        if config.background_m is not None:
            background = config.background_m
        else:
            background = estimate_background(img, config.roi)
        hm = height_map(img, background)
    result = PipelineResult(background_depth=background, timings_ms=timings)
    return plan_on_heightmap(hm, cam, config, result)
