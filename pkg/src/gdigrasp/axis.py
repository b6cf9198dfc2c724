"""Major-axis angle of a point family, and the grasp rectangle across it."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .cluster import Clustering, PointFamily
from .depthscene import CameraModel, HeightMap, robust_z
from .geometry import GraspRect, GripperModel, build_rect, normalize_angle

log = logging.getLogger(__name__)

DEGENERATE_EPS = 1e-9


class AxisMode(str, enum.Enum):
    CENTRAL_MOMENT = "central_moment"
    LITERAL_EQ1 = "literal_eq1"


class UnverifiableCentroid(ValueError):
    """The height under a cluster centroid is unknown."""


@dataclass(frozen=True)
class AxisResult:
    cluster_index: int
    phi: float
    mode: AxisMode
    degenerate: bool = False


def moment_sums(points) -> tuple[float, float, float]:
    """(sum dx*dy, sum dx^2, sum dy^2) about the point centroid."""
    pts = np.asarray(points, dtype=np.float64)
    d = pts - pts.mean(axis=0)
    return (
        float(np.sum(d[:, 0] * d[:, 1])),
        float(np.sum(d[:, 0] ** 2)),
        float(np.sum(d[:, 1] ** 2)),
    )


def major_axis(family: PointFamily, mode: AxisMode | str = AxisMode.CENTRAL_MOMENT) -> AxisResult:
    """Orientation of a family's elongation, in [0, pi).

    ``central_moment`` uses the second-moment orientation
    ``2*phi = atan2(2*Sxy, Sxx - Syy)``. ``literal_eq1`` keeps the sum of both
    squared spreads in the denominator, ``atan2(2*Sxy, Sxx + Syy)``; that form
    only spans phi in [-pi/4, pi/4] and is kept for comparison.

    An isotropic or single-point family has no defined axis: phi is 0 and
    ``degenerate`` is set.
    """
    mode = AxisMode(mode)
    pts = np.asarray(family.points, dtype=np.float64)
    if len(np.unique(pts, axis=0)) < 2:
        return AxisResult(family.cluster_index, 0.0, mode, degenerate=True)
    sxy, sxx, syy = moment_sums(pts)
    num = 2.0 * sxy
    den = sxx - syy if mode is AxisMode.CENTRAL_MOMENT else sxx + syy
    if abs(num) < DEGENERATE_EPS and abs(den) < DEGENERATE_EPS:
        return AxisResult(family.cluster_index, 0.0, mode, degenerate=True)
    return AxisResult(family.cluster_index, normalize_angle(0.5 * math.atan2(num, den)), mode)


def rect_for_cluster(
    clustering: Clustering,
    family: PointFamily,
    axis: AxisResult,
    hm: HeightMap,
    g: GripperModel,
    cam: CameraModel,
    z_window: int = 3,
) -> GraspRect:
    """Grasp rectangle centered on the cluster centroid, across its major axis.

    Rectangle size comes from the gripper projected at the depth of the
    surface under the centroid. Raises ``OutOfBoundsError`` when it leaves
    the image and ``UnverifiableCentroid`` when that surface is unknown.
    """
    centroid = clustering.centroids[family.cluster_index]
    z = robust_z(hm, centroid, z_window)
    if math.isnan(z):
        raise UnverifiableCentroid(f"unknown height under cluster {family.cluster_index}")
    if axis.degenerate:
        log.warning("cluster %d has no major axis; using a horizontal grasp", family.cluster_index)
        phi = math.pi / 2  # rectangle lands at theta = 0
    else:
        phi = axis.phi
    return build_rect(
        centroid,
        phi,
        g,
        hm.background_depth - z,
        cam,
        image_size=(hm.width, hm.height),
    )
