"""HTTP front end for the grasp planner.

Run with ``gdigrasp serve`` or ``uvicorn gdigrasp.service:app``.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..experiment import run_experiment
from ..pipeline import StageError, run_pipeline
from ..synthgen import SceneSpec, SceneSpecError, mask_rle, oracle_collision, render_scene
from .schemas import (
    ExperimentRequest,
    MetricsOut,
    OracleRequest,
    OracleResponse,
    PlanRequest,
    PlanResponse,
    RenderRequest,
    RenderResponse,
)


def _scene(doc: dict) -> SceneSpec:
    try:
        return SceneSpec.from_dict(doc)
    except SceneSpecError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(title="gdigrasp", version=__version__)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/plan", response_model=PlanResponse)
    def plan(req: PlanRequest):
        try:
            img = req.depth.build()
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            result = run_pipeline(img, req.camera.build(), req.config)
        except StageError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return result.grasps_json()

    @app.post("/oracle", response_model=OracleResponse)
    def oracle(req: OracleRequest):
        cam = req.camera.build()
        try:
            _, truth = render_scene(_scene(req.scene), cam)
        except SceneSpecError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        hit = oracle_collision(req.grasp.build(), truth, None, cam, req.collision_tol_m, req.band_px)
        return {"colliding": hit}

    @app.post("/render", response_model=RenderResponse)
    def render(req: RenderRequest):
        try:
            img, truth = render_scene(_scene(req.scene), req.camera.build())
        except SceneSpecError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "width": img.width,
            "height": img.height,
            "values_m": img.values.tolist(),
            "object_mask_rle": mask_rle(truth.object_mask),
        }

    @app.post("/experiment", response_model=MetricsOut)
    def experiment(req: ExperimentRequest):
        spec = _scene(req.scene)
        if not spec.objects:
            raise HTTPException(status_code=422, detail="scene has no objects")
        try:
            metrics = run_experiment(
                spec, req.config, req.max_trial_factor, req.camera.build(), req.k_policy
            )
        except (SceneSpecError, StageError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return metrics.row()

    return app


app = create_app()
