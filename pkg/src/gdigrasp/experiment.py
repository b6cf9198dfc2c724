"""Simulated clutter clearing and the picking-success metrics.

A pick succeeds when the gripper would not collide (checked against ground
truth) and its closing stroke spans exactly one object with both fingers
landing beside it. Slippage and dynamics are not modeled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .config import PipelineConfig
from .depthscene import CameraModel, pixel_index
from .geometry import GraspRect, GripperModel, meters_to_pixels
from .pipeline import run_pipeline
from .synthgen import SceneSpec, oracle_collision, render_scene


@dataclass(frozen=True)
class ExperimentMetrics:
    """NoT trials planned (one per object), OP objects picked, MT trials used."""

    NoT: int
    OP: int
    MT: int

    def __post_init__(self):
        if not 0 <= self.OP <= self.NoT:
            raise ValueError("need 0 <= OP <= NoT")
        if self.MT < self.NoT or self.NoT < 1:
            raise ValueError("need 1 <= NoT <= MT")

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.OP, self.NoT)

    @property
    def beta(self) -> Fraction:
        return Fraction(self.NoT, self.MT)

    def row(self) -> dict:
        return {
            "NoT": self.NoT,
            "OP": self.OP,
            "MT": self.MT,
            "alpha": float(self.alpha),
            "beta": float(self.beta),
        }


@dataclass(frozen=True)
class PickOutcome:
    success: bool
    scene: SceneSpec
    picked: Optional[int] = None
    reason: str = ""


def closing_stroke(rect: GraspRect, half_opening_px: float, step: float = 0.25) -> np.ndarray:
    """Integer pixels along the jaw stroke, finger tip to finger tip, in order."""
    n = int(math.ceil(2 * half_opening_px / step)) + 1
    t = np.linspace(-half_opening_px, half_opening_px, n)
    u = pixel_index(rect.x_c + t * math.cos(rect.theta))
    v = pixel_index(rect.y_c + t * math.sin(rect.theta))
    return np.stack([u, v], axis=1)


def simulate_pick(
    scene: SceneSpec,
    grasp: GraspRect,
    g: GripperModel,
    cam: CameraModel,
    collision_tol: float = 0.015,
    band: float = 4.0,
) -> PickOutcome:
    _, truth = render_scene(scene, cam)
    if oracle_collision(grasp, truth, g, cam, collision_tol, band):
        return PickOutcome(False, scene, reason="finger collision")
    rows, cols = truth.shape
    cu, cv = int(pixel_index(grasp.x_c)), int(pixel_index(grasp.y_c))
    palm_depth = truth.plane_depth - float(truth.heights[cv, cu])
    half = meters_to_pixels(g.opening / 2, palm_depth, cam)
    stroke = closing_stroke(grasp, half)
    if (stroke[:, 0] < 0).any() or (stroke[:, 0] >= cols).any() or (stroke[:, 1] < 0).any() or (stroke[:, 1] >= rows).any():
        return PickOutcome(False, scene, reason="stroke leaves the image")
    ids = truth.object_mask[stroke[:, 1], stroke[:, 0]]
    touched = set(int(i) for i in np.unique(ids) if i != 0)
    if len(touched) != 1:
        return PickOutcome(False, scene, reason=f"stroke spans {len(touched)} objects")
    (obj,) = touched
    if ids[0] == obj or ids[-1] == obj:
        return PickOutcome(False, scene, reason="finger lands on the object")
    return PickOutcome(True, scene.without(obj - 1), picked=obj - 1)


def run_experiment(
    spec: SceneSpec,
    config: PipelineConfig = PipelineConfig(),
    max_trial_factor: float = 1.5,
    cam: CameraModel = CameraModel(),
    k_policy: str = "fixed",
    oracle_tol: float = 0.015,
) -> ExperimentMetrics:
    """Clear a scene pick by pick, replanning from a fresh render each trial.

    Trial ``t`` plans with seed ``config.seed + t`` and renders sensor noise
    with ``spec.seed + t``, so a failed attempt is not repeated verbatim.
    ``k_policy="object_count"`` sets K to the objects still present (the
    isolated-objects setting); ``"fixed"`` keeps ``config.k``. Picks are
    judged with ``oracle_tol`` regardless of the planner's own tolerance.
    """
    if k_policy not in ("fixed", "object_count"):
        raise ValueError(f"unknown k_policy {k_policy!r}")
    if not spec.objects:
        raise ValueError("experiment needs at least one object")
    n_trials = len(spec.objects)
    cap = math.ceil(max_trial_factor * n_trials)
    g = config.gripper.build()
    scene = spec
    picked = trials = 0
    while scene.objects and trials < cap:
        seeded = SceneSpec(scene.objects, scene.plane_depth, scene.noise_sigma, spec.seed + trials)
        img, _ = render_scene(seeded, cam)
        update = {"seed": config.seed + trials}
        if k_policy == "object_count":
            update["k"] = len(scene.objects)
        cfg = config.model_copy(update=update)
        trials += 1
        result = run_pipeline(img, cam, cfg)
        if result.selected is None:
            continue
        outcome = simulate_pick(
            scene, result.selected.score.rect, g, cam, oracle_tol, config.band_px
        )
        if outcome.success:
            picked += 1
            scene = outcome.scene
    return ExperimentMetrics(NoT=n_trials, OP=picked, MT=trials)
