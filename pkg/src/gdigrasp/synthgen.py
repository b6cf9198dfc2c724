"""Synthetic tabletop scenes with ground truth, and brute-force reference checks.

Objects are primitives resting on a plane facing the camera. Rendering is
orthographic at the plane depth: each pixel's ray is intersected with the
plane, and the tallest primitive covering that plane point sets the surface
height. At 1.3 m with objects of a few centimeters this footprint error is
well below the effects the pipeline distinguishes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .depthscene import CameraModel, DepthImage, pixel_index, write_pgm, save_depth_pgm
from .geometry import GraspRect, GripperModel, OutOfBoundsError, build_rect

HEIGHT_UNIT_M = 1e-5


class SceneSpecError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    center_xy: tuple[float, float]
    size_xyz: tuple[float, float, float]
    yaw: float = 0.0

    @property
    def radius(self) -> float:
        return 0.5 * math.hypot(self.size_xyz[0], self.size_xyz[1])

    @property
    def top(self) -> float:
        return self.size_xyz[2]

    def height_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        dx, dy = x - self.center_xy[0], y - self.center_xy[1]
        lx, ly = dx * c + dy * s, -dx * s + dy * c
        inside = (np.abs(lx) <= self.size_xyz[0] / 2) & (np.abs(ly) <= self.size_xyz[1] / 2)
        return np.where(inside, self.size_xyz[2], 0.0)

    def to_dict(self) -> dict:
        return {
            "type": "box",
            "center_xy_m": list(self.center_xy),
            "yaw_rad": self.yaw,
            "size_xyz_m": list(self.size_xyz),
        }


@dataclass(frozen=True)
class Cylinder:
    center_xy: tuple[float, float]
    radius: float
    height: float

    @property
    def top(self) -> float:
        return self.height

    def height_at(self, x, y):
        r2 = (x - self.center_xy[0]) ** 2 + (y - self.center_xy[1]) ** 2
        return np.where(r2 <= self.radius**2, self.height, 0.0)

    def to_dict(self) -> dict:
        return {
            "type": "cylinder",
            "center_xy_m": list(self.center_xy),
            "radius_m": self.radius,
            "height_m": self.height,
        }


@dataclass(frozen=True)
class Sphere:
    center_xy: tuple[float, float]
    radius: float

    @property
    def top(self) -> float:
        return 2 * self.radius

    def height_at(self, x, y):
        r2 = (x - self.center_xy[0]) ** 2 + (y - self.center_xy[1]) ** 2
        cap = np.sqrt(np.clip(self.radius**2 - r2, 0.0, None))
        return np.where(r2 <= self.radius**2, self.radius + cap, 0.0)

    def to_dict(self) -> dict:
        return {"type": "sphere", "center_xy_m": list(self.center_xy), "radius_m": self.radius}


Primitive = Union[Box, Cylinder, Sphere]


def primitive_from_dict(d: dict) -> Primitive:
    kind = d.get("type")
    center = tuple(float(c) for c in d["center_xy_m"])
    if kind == "box":
        size = tuple(float(s) for s in d["size_xyz_m"])
        if len(size) != 3 or min(size) <= 0:
            raise SceneSpecError(f"bad box size {size}")
        return Box(center, size, float(d.get("yaw_rad", 0.0)))
    if kind == "cylinder":
        obj = Cylinder(center, float(d["radius_m"]), float(d["height_m"]))
        if obj.radius <= 0 or obj.height <= 0:
            raise SceneSpecError("cylinder radius and height must be positive")
        return obj
    if kind == "sphere":
        obj = Sphere(center, float(d["radius_m"]))
        if obj.radius <= 0:
            raise SceneSpecError("sphere radius must be positive")
        return obj
    raise SceneSpecError(f"unknown primitive type {kind!r}")


@dataclass(frozen=True)
class SceneSpec:
    objects: tuple[Primitive, ...] = ()
    plane_depth: float = 1.3
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.plane_depth <= 0 or self.noise_sigma < 0:
            raise SceneSpecError("plane_depth must be positive and noise_sigma non-negative")

    def without(self, index: int) -> "SceneSpec":
        return replace(self, objects=self.objects[:index] + self.objects[index + 1 :])

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        try:
            return cls(
                objects=tuple(primitive_from_dict(o) for o in d.get("objects", [])),
                plane_depth=float(d.get("plane_depth_m", 1.3)),
                noise_sigma=float(d.get("noise_sigma_m", 0.0)),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SceneSpecError):
                raise
            raise SceneSpecError(f"malformed scene spec: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "plane_depth_m": self.plane_depth,
            "noise_sigma_m": self.noise_sigma,
            "seed": self.seed,
            "objects": [o.to_dict() for o in self.objects],
        }


def load_scene(path: str | Path) -> SceneSpec:
    with open(path) as f:
        return SceneSpec.from_dict(json.load(f))


@dataclass(frozen=True, eq=False)
class SceneTruth:
    """Noiseless ground truth.

    ``object_mask`` holds 0 for background and ``i + 1`` for object ``i``.
    ``heights`` is the height encoded by the noiseless depth image,
    ``plane_depth - depth``, so it matches a height map of that image bit for
    bit.
    """

    object_mask: np.ndarray
    heights: np.ndarray
    plane_depth: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.object_mask.shape


def plane_grid(cam: CameraModel, plane_depth: float) -> tuple[np.ndarray, np.ndarray]:
    """Metric (x, y) of every pixel's ray where it meets the workspace plane."""
    v, u = np.mgrid[0 : cam.height, 0 : cam.width].astype(np.float64)
    return (u - cam.cx) * plane_depth / cam.fx, (v - cam.cy) * plane_depth / cam.fy


def _check_in_frame(spec: SceneSpec, cam: CameraModel) -> None:
    x0 = -cam.cx * spec.plane_depth / cam.fx
    x1 = (cam.width - 1 - cam.cx) * spec.plane_depth / cam.fx
    y0 = -cam.cy * spec.plane_depth / cam.fy
    y1 = (cam.height - 1 - cam.cy) * spec.plane_depth / cam.fy
    for i, obj in enumerate(spec.objects):
        cx, cy = obj.center_xy
        r = obj.radius
        if cx - r < x0 or cx + r > x1 or cy - r < y0 or cy + r > y1:
            raise SceneSpecError(f"object {i} ({type(obj).__name__}) leaves the camera frame")
        if obj.top >= spec.plane_depth:
            raise SceneSpecError(f"object {i} reaches the camera")


def render_scene(spec: SceneSpec, cam: CameraModel) -> tuple[DepthImage, SceneTruth]:
    _check_in_frame(spec, cam)
    x, y = plane_grid(cam, spec.plane_depth)
    top = np.zeros_like(x)
    mask = np.zeros(x.shape, dtype=np.int32)
    for i, obj in enumerate(spec.objects):
        h = obj.height_at(x, y)
        higher = h > top  # strict: ties keep the earlier object
        top = np.where(higher, h, top)
        mask = np.where(higher, i + 1, mask)
    depth = spec.plane_depth - top
    truth = SceneTruth(object_mask=mask, heights=spec.plane_depth - depth, plane_depth=spec.plane_depth)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        depth = depth + rng.normal(0.0, spec.noise_sigma, depth.shape)
        depth = np.clip(depth, 1e-6, None)
    return DepthImage.from_array(depth), truth


# --------------------------------------------------------------------------
# truth sidecar


def mask_rle(mask: np.ndarray) -> list[list[int]]:
    """Row-major run-length encoding as [value, run] pairs."""
    flat = np.asarray(mask).ravel()
    if flat.size == 0:
        return []
    edges = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], edges])
    runs = np.diff(np.concatenate([starts, [flat.size]]))
    return [[int(flat[s]), int(r)] for s, r in zip(starts, runs)]


def mask_from_rle(rle: Sequence[Sequence[int]], width: int, height: int) -> np.ndarray:
    values = np.repeat([v for v, _ in rle], [r for _, r in rle])
    if values.size != width * height:
        raise ValueError("run lengths do not cover the image")
    return values.reshape(height, width).astype(np.int32)


def write_scene_files(
    out_dir: str | Path,
    stem: str,
    spec: SceneSpec,
    cam: CameraModel,
) -> dict[str, Path]:
    """Render and write ``<stem>.pgm``, ``<stem>.truth.json`` and ``<stem>.height.pgm``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    img, truth = render_scene(spec, cam)
    depth_path = out_dir / f"{stem}.pgm"
    height_path = out_dir / f"{stem}.height.pgm"
    truth_path = out_dir / f"{stem}.truth.json"
    save_depth_pgm(depth_path, img)
    write_pgm(height_path, np.rint(truth.heights / HEIGHT_UNIT_M).astype(np.int64))
    doc = {
        "width": cam.width,
        "height": cam.height,
        "plane_depth_m": spec.plane_depth,
        "mask_rle": mask_rle(truth.object_mask),
        "height_pgm": height_path.name,
        "height_unit_m": HEIGHT_UNIT_M,
        "objects": [o.to_dict() for o in spec.objects],
    }
    truth_path.write_text(json.dumps(doc, indent=1))
    return {"depth": depth_path, "truth": truth_path, "height": height_path}


# --------------------------------------------------------------------------
# oracles


def finger_band_pixels(rect: GraspRect, band: float) -> np.ndarray:
    """Pixels of the two finger-end strips of ``rect``, as (u, v) rows.

    A strip is everything inside the rectangle within ``band`` pixels of a
    short side, i.e. where a finger and its clearance descend.
    """
    c, s = math.cos(rect.theta), math.sin(rect.theta)
    reach = rect.half_length + rect.half_width
    u = np.arange(math.floor(rect.x_c - reach), math.ceil(rect.x_c + reach) + 1)
    v = np.arange(math.floor(rect.y_c - reach), math.ceil(rect.y_c + reach) + 1)
    uu, vv = np.meshgrid(u, v)
    du, dv = uu - rect.x_c, vv - rect.y_c
    along = np.abs(du * c + dv * s)
    across = np.abs(-du * s + dv * c)
    keep = (
        (along > rect.half_length - band + 1e-9)
        & (along <= rect.half_length + 1e-9)
        & (across <= rect.half_width + 1e-9)
    )
    return np.stack([uu[keep], vv[keep]], axis=1)


def oracle_collision(
    rect: GraspRect,
    truth: SceneTruth,
    g: GripperModel | None = None,
    cam: CameraModel | None = None,
    collision_tol: float = 0.015,
    band: float = 4.0,
) -> bool:
    """Ground-truth finger collision check.

    Each finger sweeps its band footprint from the palm height down to the
    plane. True when an object surface inside either sweep rises above the
    palm height minus ``collision_tol``. The bare plane never counts: that is
    where the fingers stop. ``g`` and ``cam`` are accepted for interface
    symmetry; the rectangle already carries the projected gripper size.
    """
    rows, cols = truth.shape
    cu, cv = int(pixel_index(rect.x_c)), int(pixel_index(rect.y_c))
    if not (0 <= cu < cols and 0 <= cv < rows):
        return True
    palm = float(truth.heights[cv, cu])
    pix = finger_band_pixels(rect, band)
    inside = (pix[:, 0] >= 0) & (pix[:, 0] < cols) & (pix[:, 1] >= 0) & (pix[:, 1] < rows)
    if not inside.all():
        return True
    h = truth.heights[pix[:, 1], pix[:, 0]]
    on_object = truth.object_mask[pix[:, 1], pix[:, 0]] != 0
    return bool(np.any(on_object & (h > palm - collision_tol)))


def oracle_best_grasps(
    spec: SceneSpec,
    grid: int,
    angles: int,
    cam: CameraModel = CameraModel(),
    g: GripperModel = GripperModel(),
    collision_tol: float = 0.015,
    band: float = 4.0,
) -> list[GraspRect]:
    """Every collision-free rectangle on a pixel-grid x angle lattice.

    Centers step by ``grid`` pixels and must lie on an object; angles are
    ``j * pi / angles``. Order is row-major over centers, then by angle.
    """
    if grid < 1 or angles < 4:
        raise ValueError("need grid >= 1 and angles >= 4")
    _, truth = render_scene(spec, cam)
    out = []
    for v in range(0, cam.height, grid):
        for u in range(0, cam.width, grid):
            if truth.object_mask[v, u] == 0:
                continue
            depth = truth.plane_depth - truth.heights[v, u]
            for j in range(angles):
                phi = j * math.pi / angles - math.pi / 2
                try:
                    rect = build_rect((u, v), phi, g, depth, cam)
                except OutOfBoundsError:
                    continue
                if not oracle_collision(rect, truth, g, cam, collision_tol, band):
                    out.append(rect)
    return out


# --------------------------------------------------------------------------
# scene generators


def _random_primitive(rng: np.random.Generator, center) -> Primitive:
    kind = rng.choice(["box", "box", "cylinder", "sphere"])
    if kind == "box":
        short = rng.uniform(0.03, 0.055)
        long_ = rng.uniform(0.06, 0.12)
        return Box(tuple(center), (long_, short, rng.uniform(0.035, 0.1)), float(rng.uniform(0, math.pi)))
    if kind == "cylinder":
        return Cylinder(tuple(center), float(rng.uniform(0.015, 0.027)), float(rng.uniform(0.035, 0.12)))
    return Sphere(tuple(center), float(rng.uniform(0.018, 0.026)))


def _footprint_gap(a: Primitive, b: Primitive) -> float:
    """Conservative (circumscribed-circle) gap between two footprints."""
    ax, ay = a.center_xy
    bx, by = b.center_xy
    return math.hypot(ax - bx, ay - by) - a.radius - b.radius


def random_scene(
    n_objects: int,
    seed: int,
    extent: tuple[float, float] = (0.5, 0.36),
    min_gap: float = 0.0,
    plane_depth: float = 1.3,
    noise_sigma: float = 0.0,
    max_tries: int = 5000,
) -> SceneSpec:
    """Random primitives scattered over a centered ``extent`` (meters).

    ``min_gap`` is the smallest allowed distance between circumscribed
    footprints; a negative value lets neighbors overlap.
    """
    rng = np.random.default_rng(seed)
    objects: list[Primitive] = []
    tries = 0
    while len(objects) < n_objects:
        tries += 1
        if tries > max_tries:
            raise SceneSpecError(f"could not place {n_objects} objects in {extent}")
        center = (
            float(rng.uniform(-extent[0] / 2, extent[0] / 2)),
            float(rng.uniform(-extent[1] / 2, extent[1] / 2)),
        )
        obj = _random_primitive(rng, center)
        if all(_footprint_gap(obj, o) >= min_gap for o in objects):
            objects.append(obj)
    return SceneSpec(objects=tuple(objects), plane_depth=plane_depth, noise_sigma=noise_sigma, seed=seed)


def clutter_scene(n_objects: int, seed: int, **kw) -> SceneSpec:
    """Dense arrangement: footprints may come within a centimeter of each other."""
    kw.setdefault("extent", (0.42, 0.3))
    kw.setdefault("min_gap", -0.01)
    return random_scene(n_objects, seed, **kw)


def isolated_scene(n_objects: int, seed: int, **kw) -> SceneSpec:
    """Well-separated objects, at least 8 cm apart."""
    kw.setdefault("extent", (0.9, 0.7))
    kw.setdefault("min_gap", 0.08)
    return random_scene(n_objects, seed, **kw)
