"""Depth images, the pinhole camera, background estimation and height maps.

All downstream stages work in *height above the workspace* rather than raw
camera depth, so the palm/finger comparisons read the same way everywhere:
bigger height means closer to the camera.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

INVALID_DEPTH = 0.0
BACKGROUND_BIN_M = 0.005
MIN_BACKGROUND_PIXELS = 100

DEPTH_DUMP_FORMAT = "gdigrasp-depth"


class DepthFormatError(ValueError):
    """Raised for unreadable or malformed depth files."""


class BackgroundEstimationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Row-major depth-from-camera in meters; ``0.0`` marks a missing return."""

    width: int
    height: int
    values: np.ndarray
    invalid_value: float = INVALID_DEPTH

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.width <= 0 or self.height <= 0:
            raise DepthFormatError(f"zero image dimension {self.width}x{self.height}")
        if values.size != self.width * self.height:
            raise DepthFormatError(
                f"{values.size} values for a {self.width}x{self.height} image"
            )
        values = values.copy()
        values[~np.isfinite(values) | (values <= 0)] = self.invalid_value
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, depth: np.ndarray) -> "DepthImage":
        depth = np.asarray(depth, dtype=np.float64)
        return cls(width=depth.shape[1], height=depth.shape[0], values=depth.ravel())

    def as_array(self) -> np.ndarray:
        """(height, width) read-only view."""
        return self.values.reshape(self.height, self.width)

    @property
    def valid(self) -> np.ndarray:
        return self.as_array() != self.invalid_value


@dataclass(frozen=True)
class CameraModel:
    # width/height are the sensor raster; needed to render synthetic scenes
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 319.5
    cy: float = 239.5
    camera_height: float = 1.3
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.camera_height <= 0:
            raise ValueError("camera_height must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            camera_height=float(d.get("camera_height_m", 1.3)),
            width=int(d.get("width", 640)),
            height=int(d.get("height", 480)),
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "camera_height_m": self.camera_height,
            "width": self.width,
            "height": self.height,
        }

    def project(self, points: np.ndarray) -> np.ndarray:
        """Camera-frame (x, y, z) rows to sub-pixel (u, v) rows."""
        points = np.atleast_2d(points)
        u = points[:, 0] * self.fx / points[:, 2] + self.cx
        v = points[:, 1] * self.fy / points[:, 2] + self.cy
        return np.stack([u, v], axis=1)


def load_camera(path: str | Path) -> CameraModel:
    with open(path) as f:
        return CameraModel.from_dict(json.load(f))


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (n, 3) camera frame, meters
    pixel_of: np.ndarray  # (n, 2) integer (u, v) source pixel per point

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class HeightMap:
    """Height above the background plane; NaN marks an unknown pixel."""

    width: int
    height: int
    heights: np.ndarray
    background_depth: float

    def __post_init__(self):
        heights = np.asarray(self.heights, dtype=np.float64).reshape(-1)
        if heights.size != self.width * self.height:
            raise ValueError("heights size does not match dimensions")
        heights = heights.copy()
        heights.flags.writeable = False
        object.__setattr__(self, "heights", heights)

    def as_array(self) -> np.ndarray:
        return self.heights.reshape(self.height, self.width)

    def at(self, u: int, v: int) -> float:
        return float(self.heights[v * self.width + u])


# --------------------------------------------------------------------------
# file formats


def _pgm_tokens(data: bytes):
    """Yield (token, end_offset) for the whitespace-separated PGM header."""
    pos = 0
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
                pos += 1
            yield data[start:pos], pos


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary ("P5") PGM as an integer (height, width) array."""
    data = Path(path).read_bytes()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        if magic != b"P5":
            raise DepthFormatError(f"{path}: not a binary PGM (magic {magic!r})")
        width = int(next(tokens)[0])
        height = int(next(tokens)[0])
        maxval_tok, end = next(tokens)
        maxval = int(maxval_tok)
    except (StopIteration, ValueError) as exc:
        if isinstance(exc, DepthFormatError):
            raise
        raise DepthFormatError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0:
        raise DepthFormatError(f"{path}: zero image dimension {width}x{height}")
    if not 0 < maxval < 65536:
        raise DepthFormatError(f"{path}: bad maxval {maxval}")
    # exactly one whitespace byte separates the header from the raster
    raster = data[end + 1 :]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    if len(raster) < expected:
        raise DepthFormatError(
            f"{path}: raster has {len(raster)} bytes, expected {expected}"
        )
    return np.frombuffer(raster[:expected], dtype=dtype).reshape(height, width).astype(np.int64)


def write_pgm(path: str | Path, pixels: np.ndarray, maxval: int = 65535) -> None:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError("PGM raster must be 2-D")
    if pixels.min(initial=0) < 0 or pixels.max(initial=0) > maxval:
        raise ValueError("pixel values out of PGM range")
    height, width = pixels.shape
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + pixels.astype(dtype).tobytes())


def save_depth_pgm(path: str | Path, img: DepthImage, unit_scale: float = 0.001) -> None:
    """Quantize to ``unit_scale`` steps (millimeters by default) and write PGM."""
    stored = np.rint(img.as_array() / unit_scale)
    if stored.max(initial=0) > 65535:
        raise ValueError("depth exceeds 16-bit range at this unit scale")
    write_pgm(path, stored.astype(np.int64))


def save_depth_json(path: str | Path, img: DepthImage) -> None:
    """Lossless float64 dump (the synthetic-scene interchange format)."""
    doc = {
        "format": DEPTH_DUMP_FORMAT,
        "width": img.width,
        "height": img.height,
        "unit_scale": 1.0,
        "values": img.values.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_depth(path: str | Path, unit_scale: float | None = None) -> DepthImage:
    """Load a 16-bit PGM or a JSON depth dump.

    ``unit_scale`` is meters per stored unit. PGM defaults to millimeters;
    a JSON dump carries its own scale, which an explicit argument overrides.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    head = path.read_bytes()[:2]
    if head == b"P5":
        stored = read_pgm(path)
        scale = 0.001 if unit_scale is None else unit_scale
        return DepthImage.from_array(stored * scale)
    if head[:1] in (b"{", b" ", b"\n"):
        try:
            doc = json.loads(path.read_text())
            width, height = int(doc["width"]), int(doc["height"])
            values = np.asarray(doc["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DepthFormatError(f"{path}: malformed depth dump") from exc
        if doc.get("format") != DEPTH_DUMP_FORMAT:
            raise DepthFormatError(f"{path}: unknown dump format {doc.get('format')!r}")
        scale = float(doc.get("unit_scale", 1.0)) if unit_scale is None else unit_scale
        return DepthImage(width=width, height=height, values=values * scale)
    raise DepthFormatError(f"{path}: neither a P5 PGM nor a JSON depth dump")


# --------------------------------------------------------------------------
# operations


def deproject(img: DepthImage, cam: CameraModel) -> PointCloud:
    depth = img.as_array()
    v, u = np.nonzero(depth != img.invalid_value)
    d = depth[v, u]
    x = (u - cam.cx) * d / cam.fx
    y = (v - cam.cy) * d / cam.fy
    return PointCloud(points=np.stack([x, y, d], axis=1), pixel_of=np.stack([u, v], axis=1))


def _roi_slice(img: DepthImage, roi: Sequence[int] | None) -> np.ndarray:
    depth = img.as_array()
    if roi is None:
        return depth
    u0, v0, w, h = (int(r) for r in roi)
    if u0 < 0 or v0 < 0 or w <= 0 or h <= 0 or u0 + w > img.width or v0 + h > img.height:
        raise ValueError(f"roi {tuple(roi)} outside {img.width}x{img.height} image")
    return depth[v0 : v0 + h, u0 : u0 + w]


def estimate_background(img: DepthImage, roi: Sequence[int] | None = None) -> float:
    """Modal depth of the roi on a 5 mm histogram.

    Returns the median of the depths inside the most populated bin; on a tie
    the deeper bin wins, since the workspace is the farthest surface.
    """
    window = _roi_slice(img, roi)
    d = window[window != img.invalid_value]
    if d.size < MIN_BACKGROUND_PIXELS:
        raise BackgroundEstimationError(
            f"only {d.size} valid pixels in roi, need {MIN_BACKGROUND_PIXELS}"
        )
    bins = np.floor(d / BACKGROUND_BIN_M).astype(np.int64)
    ids, counts = np.unique(bins, return_counts=True)
    best = ids[counts == counts.max()].max()
    return float(np.median(d[bins == best]))


def height_map(img: DepthImage, background_depth: float) -> HeightMap:
    if background_depth <= 0:
        raise ValueError("background_depth must be positive")
    depth = img.values
    heights = np.where(depth == img.invalid_value, np.nan, background_depth - depth)
    return HeightMap(
        width=img.width,
        height=img.height,
        heights=heights,
        background_depth=float(background_depth),
    )


def pixel_index(coord) -> np.ndarray:
    """Nearest integer pixel, rounding halves up (not to even)."""
    return np.floor(np.asarray(coord, dtype=np.float64) + 0.5).astype(np.int64)


def robust_z_many(hm: HeightMap, us, vs, window: int = 3) -> np.ndarray:
    """Vectorized :func:`robust_z`; out-of-image pixels return NaN."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    u = pixel_index(us).reshape(-1)
    v = pixel_index(vs).reshape(-1)
    out = np.full(u.shape, np.nan)
    inside = (u >= 0) & (u < hm.width) & (v >= 0) & (v < hm.height)
    if not inside.any():
        return out
    grid = hm.as_array()
    if window == 1:
        out[inside] = grid[v[inside], u[inside]]
        return out
    r = window // 2
    padded = np.pad(grid, r, mode="constant", constant_values=np.nan)
    offs = np.arange(-r, r + 1)
    du, dv = np.meshgrid(offs, offs)
    cols = u[inside, None] + r + du.ravel()[None, :]
    rows = v[inside, None] + r + dv.ravel()[None, :]
    stack = padded[rows, cols]
    med = np.full(stack.shape[0], np.nan)
    has = ~np.all(np.isnan(stack), axis=1)
    if has.any():
        med[has] = np.nanmedian(stack[has], axis=1)
    out[inside] = med
    return out


def robust_z(hm: HeightMap, pixel, window: int = 3) -> float:
    """Median valid height in a ``window`` x ``window`` neighborhood.

    The neighborhood is clipped to the image. Returns NaN (unknown) when no
    pixel in the window is valid.
    """
    u, v = pixel
    iu, iv = int(pixel_index(u)), int(pixel_index(v))
    if not (0 <= iu < hm.width and 0 <= iv < hm.height):
        raise IndexError(f"pixel {pixel} outside {hm.width}x{hm.height} map")
    return float(robust_z_many(hm, [u], [v], window)[0])
