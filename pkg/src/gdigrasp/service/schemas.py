"""Request and response models for the planning service."""
from __future__ import annotations

import base64
import binascii
import tempfile
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import PipelineConfig
from ..depthscene import CameraModel, DepthImage, load_depth
from ..geometry import GraspRect


class CameraIn(BaseModel):
    fx: float = Field(525.0, gt=0)
    fy: float = Field(525.0, gt=0)
    cx: float = 319.5
    cy: float = 239.5
    camera_height_m: float = Field(1.3, gt=0)
    width: int = Field(640, gt=0)
    height: int = Field(480, gt=0)

    def build(self) -> CameraModel:
        return CameraModel.from_dict(self.model_dump())


class DepthIn(BaseModel):
    """Depth either as row-major meters or as a base64 16-bit PGM."""

    width: Optional[int] = Field(None, gt=0)
    height: Optional[int] = Field(None, gt=0)
    values_m: Optional[list[float]] = None
    pgm_base64: Optional[str] = None
    unit_scale: float = Field(0.001, gt=0)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.values_m is None) == (self.pgm_base64 is None):
            raise ValueError("give exactly one of values_m or pgm_base64")
        if self.values_m is not None and (self.width is None or self.height is None):
            raise ValueError("values_m needs width and height")
        return self

    def build(self) -> DepthImage:
        if self.values_m is not None:
            return DepthImage(width=self.width, height=self.height, values=np.asarray(self.values_m))
        try:
            raw = base64.b64decode(self.pgm_base64, validate=True)
        except binascii.Error as exc:
            raise ValueError("pgm_base64 is not valid base64") from exc
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "depth.pgm"
            path.write_bytes(raw)
            return load_depth(path, self.unit_scale)

    @classmethod
    def from_pgm_bytes(cls, raw: bytes, unit_scale: float = 0.001) -> "DepthIn":
        return cls(pgm_base64=base64.b64encode(raw).decode("ascii"), unit_scale=unit_scale)


class GdiOut(BaseModel):
    max_deviation_m: float
    positive_fraction: float


class GraspOut(BaseModel):
    rank: int
    center_px: tuple[float, float]
    theta_rad: float
    half_length_px: float
    half_width_px: float
    gdi: GdiOut
    cluster: int


class StageCounts(BaseModel):
    sampled: int
    level1: int
    level2: int
    clusters: int
    scored: int


class PlanRequest(BaseModel):
    depth: DepthIn
    camera: CameraIn = CameraIn()
    config: PipelineConfig = PipelineConfig()


class PlanResponse(BaseModel):
    grasps: list[GraspOut]
    message: str
    counts: StageCounts
    background_depth_m: float
    notes: list[str] = []


class GraspRectIn(BaseModel):
    """The geometric part of a planned grasp; extra fields are ignored."""

    model_config = ConfigDict(extra="ignore")

    center_px: tuple[float, float]
    theta_rad: float
    half_length_px: float = Field(gt=0)
    half_width_px: float = Field(gt=0)

    def build(self) -> GraspRect:
        return GraspRect(
            x_c=self.center_px[0],
            y_c=self.center_px[1],
            theta=self.theta_rad,
            half_length=self.half_length_px,
            half_width=self.half_width_px,
        )


class OracleRequest(BaseModel):
    scene: dict[str, Any]
    grasp: GraspRectIn
    camera: CameraIn = CameraIn()
    band_px: float = Field(4.0, gt=0)
    collision_tol_m: float = Field(0.015, ge=0)


class OracleResponse(BaseModel):
    colliding: bool


class RenderRequest(BaseModel):
    scene: dict[str, Any]
    camera: CameraIn = CameraIn()


class RenderResponse(BaseModel):
    width: int
    height: int
    values_m: list[float]
    object_mask_rle: list[tuple[int, int]]


class ExperimentRequest(BaseModel):
    scene: dict[str, Any]
    config: PipelineConfig = PipelineConfig()
    camera: CameraIn = CameraIn()
    max_trial_factor: float = Field(1.5, ge=1.0)
    k_policy: Literal["fixed", "object_count"] = "fixed"


class MetricsOut(BaseModel):
    NoT: int
    OP: int
    MT: int
    alpha: float
    beta: float
