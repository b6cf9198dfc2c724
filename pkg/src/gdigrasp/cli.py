"""Command-line front end.

Exit status: 0 on success, 1 on a usage error, 2 when processing fails.
"""
from __future__ import annotations

import argparse
import base64
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from .config import PipelineConfig, load_config
from .depthscene import CameraModel, load_camera, load_depth
from .experiment import ExperimentMetrics, run_experiment
from .geometry import GraspRect
from .synthgen import load_scene, oracle_collision, render_scene, write_scene_files

log = logging.getLogger("gdigrasp")

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2
CSV_FIELDS = ("NoT", "OP", "MT", "alpha", "beta")
TABLE_FIELDS = ("scene",) + CSV_FIELDS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _camera(path: str | None) -> CameraModel:
    return load_camera(path) if path else CameraModel()


# ---------------------------------------------------------------- plan


def _plan_remote(args, cam: CameraModel, config: PipelineConfig) -> dict:
    import httpx

    raw = Path(args.depth).read_bytes()
    if raw[:2] == b"P5":
        depth = {"pgm_base64": base64.b64encode(raw).decode("ascii")}
        if args.unit_scale is not None:
            depth["unit_scale"] = args.unit_scale
    else:
        img = load_depth(args.depth, args.unit_scale)
        depth = {"width": img.width, "height": img.height, "values_m": img.values.tolist()}
    body = {"depth": depth, "camera": cam.to_dict(), "config": config.model_dump(mode="json")}
    resp = httpx.post(args.server.rstrip("/") + "/plan", json=body, timeout=60.0)
    if resp.status_code != 200:
        raise RuntimeError(f"server answered {resp.status_code}: {resp.text}")
    return resp.json()


def cmd_plan(args) -> int:
    if args.server and args.overlay:
        raise UsageError("--overlay needs the in-process planner; drop --server")
    cam = _camera(args.camera)
    config = load_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    if args.server:
        doc = _plan_remote(args, cam, config)
    else:
        from .overlay import emit_overlay
        from .pipeline import run_pipeline

        img = load_depth(args.depth, args.unit_scale)
        result = run_pipeline(img, cam, config)
        doc = result.grasps_json()
        if args.overlay:
            emit_overlay(img, result, args.overlay)
    _write_text(args.out, _dump(doc))
    if not doc["grasps"]:
        print(doc["message"], file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    spec = load_scene(args.scene)
    stem = args.stem or Path(args.scene).stem
    paths = write_scene_files(args.out_dir, stem, spec, _camera(args.camera))
    for kind in ("depth", "height", "truth"):
        print(paths[kind])
    return EXIT_OK


# ---------------------------------------------------------------- bench


def _scene_files(target: str) -> list[Path]:
    path = Path(target)
    if path.is_dir():
        files = sorted(p for p in path.glob("*.json") if not p.name.endswith(".truth.json"))
        if not files:
            raise FileNotFoundError(f"{path}: no scene files")
        return files
    if not path.exists():
        raise FileNotFoundError(path)
    return [path]


def _bench_one(job) -> ExperimentMetrics:
    path, config, factor, cam, k_policy = job
    return run_experiment(load_scene(path), config, factor, cam, k_policy)


def _fmt(x: Fraction | float) -> str:
    return f"{float(x):.4f}"


def bench_rows(names, metrics) -> list[dict]:
    rows = [
        {"scene": n, "NoT": m.NoT, "OP": m.OP, "MT": m.MT, "alpha": _fmt(m.alpha), "beta": _fmt(m.beta)}
        for n, m in zip(names, metrics)
    ]
    k = len(metrics)
    rows.append(
        {
            "scene": "mean",
            "NoT": _fmt(Fraction(sum(m.NoT for m in metrics), k)),
            "OP": _fmt(Fraction(sum(m.OP for m in metrics), k)),
            "MT": _fmt(Fraction(sum(m.MT for m in metrics), k)),
            "alpha": _fmt(sum((m.alpha for m in metrics), Fraction(0)) / k),
            "beta": _fmt(sum((m.beta for m in metrics), Fraction(0)) / k),
        }
    )
    return rows


def bench_csv(rows) -> str:
    buf = io.StringIO()
    # scene names live in the text table; the CSV keeps the metric columns only
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def bench_table(rows) -> str:
    cells = [list(TABLE_FIELDS)] + [[str(r[f]) for f in TABLE_FIELDS] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(TABLE_FIELDS))]
    lines = []
    for row in cells:
        first = row[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join([first] + rest))
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    files = _scene_files(args.scenes)
    config = load_config(args.config)
    cam = _camera(args.camera)
    jobs = [(f, config, args.max_trial_factor, cam, args.k_policy) for f in files]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            metrics = list(pool.map(_bench_one, jobs))
    else:
        metrics = [_bench_one(j) for j in jobs]
    rows = bench_rows([f.stem for f in files], metrics)
    if args.out:
        Path(args.out).write_text(bench_csv(rows))
    sys.stdout.write(bench_table(rows))
    return EXIT_OK


# ---------------------------------------------------------------- oracle


def _grasp_from_doc(doc: dict) -> GraspRect:
    # accept a bare grasp or a whole plan output (rank 1 is checked)
    if "grasps" in doc:
        if not doc["grasps"]:
            raise ValueError("plan output holds no grasp")
        doc = doc["grasps"][0]
    return GraspRect(
        x_c=float(doc["center_px"][0]),
        y_c=float(doc["center_px"][1]),
        theta=float(doc["theta_rad"]),
        half_length=float(doc["half_length_px"]),
        half_width=float(doc["half_width_px"]),
    )


def cmd_oracle(args) -> int:
    cam = _camera(args.camera)
    spec = load_scene(args.scene)
    rect = _grasp_from_doc(json.loads(Path(args.grasp).read_text()))
    _, truth = render_scene(spec, cam)
    hit = oracle_collision(rect, truth, None, cam, args.collision_tol, args.band)
    sys.stdout.write(json.dumps({"colliding": hit}) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- serve


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("gdigrasp.service:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gdigrasp", description="Grasp planning on depth images.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("plan", help="plan grasps on one depth image")
    sp.add_argument("--depth", required=True, help="16-bit PGM or JSON depth dump")
    sp.add_argument("--camera", help="camera intrinsics JSON (default: 640x480 Kinect-like)")
    sp.add_argument("--config", help="pipeline config JSON")
    sp.add_argument("--out", help="grasps JSON path (default stdout)")
    sp.add_argument("--overlay", help="write a PPM visualization here")
    sp.add_argument("--unit-scale", type=float, help="meters per stored depth unit")
    sp.add_argument("--seed", type=int, help="override the config seed")
    sp.add_argument("--server", help="plan on a running service at this URL")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("gen", help="render a scene spec to PGM plus truth sidecar")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--stem", help="output file stem (default: scene file stem)")
    sp.add_argument("--camera")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("bench", help="simulated clutter clearing over scene specs")
    sp.add_argument("--scenes", required=True, help="scene JSON or a directory of them")
    sp.add_argument("--config")
    sp.add_argument("--camera")
    sp.add_argument("--out", help="CSV path")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--max-trial-factor", type=float, default=1.5)
    sp.add_argument("--k-policy", choices=("fixed", "object_count"), default="fixed")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("oracle", help="ground-truth collision verdict for one grasp")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--grasp", required=True, help="grasp JSON or plan output")
    sp.add_argument("--camera")
    sp.add_argument("--band", type=float, default=4.0, help="finger band width, pixels")
    sp.add_argument("--collision-tol", type=float, default=0.015)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gdigrasp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - every processing failure maps to one exit code
        log.debug("failure", exc_info=True)
        print(f"gdigrasp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
