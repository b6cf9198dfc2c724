"""Pipeline configuration: one flat JSON document covering every stage."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from .axis import AxisMode
from .gdi import GdiConfig, PeripheryMode, RankingMode
from .geometry import GripperModel
from .sampler import SamplerConfig


class GripperSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_opening_m: float = Field(0.18, gt=0)
    finger_thickness_m: float = Field(0.02, gt=0)
    side_clearance_m: float = Field(0.02, gt=0)
    opening_fraction: float = Field(0.5, gt=0, le=1)

    def build(self) -> GripperModel:
        return GripperModel.from_dict(self.model_dump())


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # sampling and filtering
    n_samples: int = Field(5000, gt=0)
    l_v_px: float = Field(30.0, gt=0)
    margin_m: float = Field(0.025, gt=0)
    corner_imbalance_max_m: float = Field(0.015, gt=0)
    seed: int = 0
    roi: Optional[tuple[int, int, int, int]] = None
    z_window: int = Field(3, ge=1)
    background_m: Optional[float] = Field(None, gt=0)
    # clustering
    k: int = Field(8, ge=1)
    kmeans_max_iter: int = Field(100, ge=1)
    kmeans_tol_px2: float = Field(1e-4, ge=0)
    kmeans_n_init: int = Field(10, ge=1)
    # axes and scoring
    axis_mode: AxisMode = AxisMode.CENTRAL_MOMENT
    band_px: float = Field(4.0, gt=0)
    clearance_min_m: float = Field(0.005, ge=0)
    collision_tol_m: float = Field(0.015, ge=0)
    ranking_mode: RankingMode = RankingMode.CLEARANCE_COUNT
    periphery: PeripheryMode = PeripheryMode.FINGER_ENDS
    top_n: int = Field(5, ge=1)
    min_positive_fraction: float = Field(0.0, ge=0, le=1)
    gripper: GripperSettings = GripperSettings()

    def sampler(self, width: int, height: int) -> SamplerConfig:
        return SamplerConfig(
            roi=self.roi if self.roi is not None else (0, 0, width, height),
            n_samples=self.n_samples,
            l_v=self.l_v_px,
            margin=self.margin_m,
            corner_imbalance_max=self.corner_imbalance_max_m,
            seed=self.seed,
            z_window=self.z_window,
        )

    def gdi(self) -> GdiConfig:
        return GdiConfig(
            band=self.band_px,
            clearance_min=self.clearance_min_m,
            collision_tol=self.collision_tol_m,
            ranking_mode=self.ranking_mode,
            top_n=self.top_n,
            periphery=self.periphery,
            z_window=self.z_window,
            min_positive_fraction=self.min_positive_fraction,
        )


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path) as f:
        return PipelineConfig.model_validate(json.load(f))
