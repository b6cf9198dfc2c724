"""Gripper parameterizations: the sampling line and the scoring rectangle.

Image coordinates are (u, v) = (column, row) with v pointing down; angles are
measured from the +u axis toward +v and kept in [0, pi) because a parallel
jaw is symmetric under a half turn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .depthscene import CameraModel


class OutOfBoundsError(ValueError):
    """A grasp rectangle does not fit inside the image."""


def normalize_angle(theta: float) -> float:
    t = math.fmod(theta, math.pi)
    if t < 0:
        t += math.pi
    # fmod can land exactly on pi after the shift for tiny negative inputs
    return 0.0 if t >= math.pi else t


@dataclass(frozen=True)
class GripperModel:
    max_opening: float = 0.18
    finger_thickness: float = 0.02
    side_clearance: float = 0.02
    opening_fraction: float = 0.5

    def __post_init__(self):
        for name in ("max_opening", "finger_thickness", "side_clearance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.opening_fraction <= 1:
            raise ValueError("opening_fraction must lie in (0, 1]")
        if self.opening < self.finger_thickness:
            raise ValueError("working opening is narrower than a finger")

    @property
    def opening(self) -> float:
        """Working jaw opening in meters."""
        return self.opening_fraction * self.max_opening

    @classmethod
    def from_dict(cls, d: dict) -> "GripperModel":
        return cls(
            max_opening=float(d.get("max_opening_m", 0.18)),
            finger_thickness=float(d.get("finger_thickness_m", 0.02)),
            side_clearance=float(d.get("side_clearance_m", 0.02)),
            opening_fraction=float(d.get("opening_fraction", 0.5)),
        )

    def to_dict(self) -> dict:
        return {
            "max_opening_m": self.max_opening,
            "finger_thickness_m": self.finger_thickness,
            "side_clearance_m": self.side_clearance,
            "opening_fraction": self.opening_fraction,
        }


@dataclass(frozen=True)
class LinePose:
    x_c: float
    y_c: float
    l_v: float
    theta: float

    def __post_init__(self):
        if self.l_v <= 0:
            raise ValueError("l_v must be positive")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_c, self.y_c)


@dataclass(frozen=True)
class GraspRect:
    x_c: float
    y_c: float
    theta: float
    half_length: float
    half_width: float

    def __post_init__(self):
        if not self.half_length >= self.half_width > 0:
            raise ValueError("need half_length >= half_width > 0")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_c, self.y_c)

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit vectors along the opening direction and across it."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([c, s]), np.array([-s, c])

    def vertices(self) -> np.ndarray:
        """The four (u, v) corners, in order around the outline."""
        along, across = self.axes
        center = np.array([self.x_c, self.y_c])
        a, w = along * self.half_length, across * self.half_width
        return np.array([center + a + w, center + a - w, center - a - w, center - a + w])

    def local_coords(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        """Offsets of pixel positions along and across the rectangle."""
        du = np.asarray(u, dtype=np.float64) - self.x_c
        dv = np.asarray(v, dtype=np.float64) - self.y_c
        c, s = math.cos(self.theta), math.sin(self.theta)
        return du * c + dv * s, -du * s + dv * c

    def inside_image(self, width: int, height: int) -> bool:
        verts = self.vertices()
        return bool(
            (verts[:, 0] >= 0).all()
            and (verts[:, 0] <= width - 1).all()
            and (verts[:, 1] >= 0).all()
            and (verts[:, 1] <= height - 1).all()
        )


def corners(p: LinePose) -> tuple[tuple[float, float], tuple[float, float]]:
    """Finger positions of a line pose: center +/- half its length along theta."""
    dx = 0.5 * p.l_v * math.cos(p.theta)
    dy = 0.5 * p.l_v * math.sin(p.theta)
    return (p.x_c + dx, p.y_c + dy), (p.x_c - dx, p.y_c - dy)


def corners_array(x, y, l_v, theta) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`corners`; returns (n, 2) arrays for A and B."""
    x, y, l_v, theta = (np.asarray(a, dtype=np.float64) for a in (x, y, l_v, theta))
    dx = 0.5 * l_v * np.cos(theta)
    dy = 0.5 * l_v * np.sin(theta)
    return np.stack([x + dx, y + dy], axis=-1), np.stack([x - dx, y - dy], axis=-1)


def meters_to_pixels(length: float, depth: float, cam: CameraModel) -> float:
    """Pinhole image length of a fronto-parallel segment at ``depth``.

    Uses fx; with anisotropic intrinsics a vertical segment would scale by fy
    instead, a difference this module ignores.
    """
    if depth <= 0:
        raise ValueError("depth must be positive")
    return cam.fx * length / depth


def build_rect(
    centroid,
    phi: float,
    g: GripperModel,
    local_depth: float,
    cam: CameraModel,
    image_size: tuple[int, int] | None = None,
) -> GraspRect:
    """Grasp rectangle across a major axis ``phi``, sized from the physical gripper.

    ``image_size`` is (width, height); defaults to the camera raster.
    """
    if local_depth <= 0:
        raise ValueError("local_depth must be positive")
    rect = GraspRect(
        x_c=float(centroid[0]),
        y_c=float(centroid[1]),
        theta=phi + math.pi / 2,
        half_length=meters_to_pixels(g.opening / 2 + g.side_clearance, local_depth, cam),
        half_width=meters_to_pixels(g.finger_thickness / 2 + g.side_clearance, local_depth, cam),
    )
    width, height = image_size if image_size is not None else (cam.width, cam.height)
    if not rect.inside_image(width, height):
        raise OutOfBoundsError(
            f"rectangle at ({rect.x_c:.1f}, {rect.y_c:.1f}) leaves the {width}x{height} image"
        )
    return rect
