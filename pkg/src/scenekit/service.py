"""HTTP service exposing one scene to editors and other clients.

Scene state is an immutable value swapped atomically under a lock; renders
snapshot it and run in the request threadpool. Training-class work (train,
geometry/color fine-tune) runs on its own worker thread against a private
registry copy that is swapped in when the job completes, so requests never
observe half-updated parameters and never block on a training step. At most
one training-class job may be queued or running at a time; placement edits
and scene replacement are rejected with 409 while one is active.
"""

from __future__ import annotations

import hashlib
import json
import tempfile
import threading
from collections import OrderedDict
from dataclasses import dataclass, field as dataclass_field, replace
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .editing import (EditError, apply_placement_edit, edit_from_json,
                      finetune_color, finetune_geometry)
from .field import CheckpointError, FieldParams, FieldRegistry
from .guidance import GuidanceConfig, GuidanceConfigError, select_guidance
from .images import Image, pfm_bytes, png_bytes, read_pfm
from .render import RenderError, camera_from_json, camera_look_at, render_composed, render_single
from .scene import (CANONICAL_OBJECT_BOUNDS, SceneDescription, SceneFormatError,
                    SceneValidationError, finalize_scene, load_scene, scene_from_json,
                    scene_to_json)
from .training import TrainConfig, TrainEvent, train, train_config_from_json

_OPACITY_CACHE_SIZE = 32
_MAX_RENDER_PIXELS = 1 << 20
_MAX_SAMPLES = 4096
_DEFAULT_FINETUNE = TrainConfig(total_iters=200, local_block=10, lr=5e-3,
                                render_resolution=(32, 32), n_samples_per_ray=32)


@dataclass(eq=False)
class Job:
    """One training-class job and its worker-thread bookkeeping."""

    job_id: str
    kind: str  # train | finetune_geometry | finetune_color
    total: int
    state: str = "queued"
    done: int = 0
    latest_preview: str | None = None
    error: str | None = None
    cancel: threading.Event = dataclass_field(default_factory=threading.Event)
    events: list[dict] = dataclass_field(default_factory=list)
    thread: threading.Thread | None = None

    def to_json(self) -> dict:
        return {"job_id": self.job_id, "kind": self.kind, "state": self.state,
                "progress": {"done": self.done, "total": self.total},
                "latest_preview": self.latest_preview, "error": self.error}


class ServiceState:
    """Mutable hub guarded by self.lock; scene/registry are swapped, never
    mutated in place by request handlers."""

    def __init__(self, scene: SceneDescription, registry: FieldRegistry,
                 base_dir: Path, guidance_spec: str | None = None,
                 preview_dir: Path | None = None):
        self.lock = threading.RLock()
        self.scene = scene
        self.registry = registry
        self.base_dir = base_dir
        self.guidance_spec = guidance_spec
        self.jobs: dict[str, Job] = {}
        self._job_seq = 0
        self.opacity_store: OrderedDict[str, bytes] = OrderedDict()
        self.preview_dir = Path(preview_dir) if preview_dir else Path(
            tempfile.mkdtemp(prefix="scenekit-previews-"))
        self.preview_dir.mkdir(parents=True, exist_ok=True)
        self.preview_every = 100

    @classmethod
    def from_paths(cls, scene_path: str | Path,
                   guidance_spec: str | None = None) -> "ServiceState":
        scene = load_scene(scene_path)
        base_dir = Path(scene_path).resolve().parent
        registry = FieldRegistry.from_scene(scene, base_dir=base_dir)
        return cls(scene, registry, base_dir, guidance_spec=guidance_spec)

    # -- jobs ---------------------------------------------------------------

    def active_job(self) -> Job | None:
        for job in self.jobs.values():
            if job.state in ("queued", "running"):
                return job
        return None

    def new_job(self, kind: str, total: int) -> Job:
        self._job_seq += 1
        job = Job(job_id=f"job-{self._job_seq}", kind=kind, total=total)
        self.jobs[job.job_id] = job
        return job

    def make_guidance(self):
        if self.guidance_spec is None:
            raise GuidanceConfigError(
                "service started without guidance (pass --guidance)")
        return select_guidance(GuidanceConfig.from_string(self.guidance_spec))

    def snapshot(self) -> tuple[SceneDescription, FieldRegistry]:
        with self.lock:
            return self.scene, self.registry

    def copy_registry(self) -> FieldRegistry:
        with self.lock:
            return FieldRegistry({
                fid: f.copy() if isinstance(f, FieldParams) else f
                for fid, f in self.registry.items()})

    # -- opacity reference store ---------------------------------------------

    def store_opacity(self, pfm: bytes) -> str:
        token = hashlib.sha256(pfm).hexdigest()[:16]
        with self.lock:
            self.opacity_store[token] = pfm
            self.opacity_store.move_to_end(token)
            while len(self.opacity_store) > _OPACITY_CACHE_SIZE:
                self.opacity_store.popitem(last=False)
        return token


def _fail(status: int, message: str, violations: list[str] | None = None):
    body: dict[str, Any] = {"error": message}
    if violations is not None:
        body["violations"] = violations
    raise HTTPException(status_code=status, detail=body)


async def _json_body(request: Request) -> Any:
    try:
        return json.loads(await request.body())
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        _fail(400, f"body is not valid JSON: {e}")


def _preview_camera(bounds, resolution=(96, 96)):
    direction = np.array([0.45, 0.5, 0.74])
    eye = bounds.center + 2.2 * float(np.max(bounds.extent)) * direction / np.linalg.norm(direction)
    return camera_look_at(eye, bounds.center, resolution=resolution)


def _render_args(payload: Any) -> tuple[dict, tuple[int, int], int]:
    if not isinstance(payload, dict):
        _fail(400, "body must be a JSON object")
    unknown = set(payload) - {"camera", "resolution", "n_samples", "field_id"}
    if unknown:
        _fail(400, f"unknown key {sorted(unknown)[0]!r}")
    camera = payload.get("camera")
    if camera is None:
        _fail(400, "body needs a camera")
    resolution = (64, 64)
    if "resolution" in payload:
        r = payload["resolution"]
        if not (isinstance(r, list) and len(r) == 2 and all(isinstance(x, int) for x in r)):
            _fail(400, "resolution must be [width, height] integers")
        resolution = (r[0], r[1])
    n_samples = payload.get("n_samples", 64)
    if not isinstance(n_samples, int) or not 1 <= n_samples <= _MAX_SAMPLES:
        _fail(400, f"n_samples must be an integer in [1, {_MAX_SAMPLES}]")
    if resolution[0] * resolution[1] > _MAX_RENDER_PIXELS:
        _fail(400, "requested resolution is too large")
    return camera, resolution, n_samples


def _image_response(state: ServiceState, image: Image) -> Response:
    token = state.store_opacity(pfm_bytes(image.opacity))
    return Response(content=png_bytes(image.pixels), media_type="image/png",
                    headers={"X-Opacity-PFM": f"/api/renders/{token}/opacity.pfm"})


# ---------------------------------------------------------------------------
# job workers


def _finish(state: ServiceState, job: Job, swap) -> None:
    """Terminal transition: cancelled jobs fail without publishing results;
    completed jobs swap their trained state in atomically."""
    if job.cancel.is_set():
        job.error = "cancelled"
        job.state = "failed"
        return
    with state.lock:
        swap()
    job.state = "done"


def _job_sink(state: ServiceState, job: Job, scene, registry, preview_every: int):
    camera = _preview_camera(scene.bounds)

    def sink(event: TrainEvent) -> None:
        job.events.append(event.to_json())
        job.done = len(job.events)
        if preview_every > 0 and job.done % preview_every == 0 and not job.cancel.is_set():
            image = render_composed(scene, registry, camera, 48)
            path = state.preview_dir / f"{job.job_id}-{job.done:06d}.png"
            path.write_bytes(png_bytes(image.pixels))
            job.latest_preview = str(path)
    return sink


def _run_train(state: ServiceState, job: Job, config: TrainConfig, guidance) -> None:
    try:
        scene, _ = state.snapshot()
        registry = state.copy_registry()
        job.state = "running"
        sink = _job_sink(state, job, scene, registry, state.preview_every)
        train(scene, config, guidance, registry=registry, event_sink=sink,
              cancel_cb=job.cancel.is_set)

        def swap():
            state.registry = registry
        _finish(state, job, swap)
    except Exception as e:  # worker thread: surface, never propagate
        job.error = str(e)
        job.state = "failed"


def _run_geometry(state: ServiceState, job: Job, edit, config: TrainConfig,
                  guidance) -> None:
    try:
        scene, _ = state.snapshot()
        registry = state.copy_registry()
        job.state = "running"
        sink = _job_sink(state, job, scene, registry, state.preview_every)
        new_scene, _ = finetune_geometry(scene, registry, edit.proxy_id, edit.shape,
                                         config, guidance, event_sink=sink,
                                         cancel_cb=job.cancel.is_set)

        def swap():
            state.scene = new_scene
            state.registry = registry
        _finish(state, job, swap)
    except Exception as e:
        job.error = str(e)
        job.state = "failed"


def _run_color(state: ServiceState, job: Job, field_id: str, target, guidance,
               prompt: str, config: TrainConfig) -> None:
    try:
        registry = state.copy_registry()
        field = registry[field_id]
        job.state = "running"

        def sink(event: TrainEvent) -> None:
            job.events.append(event.to_json())
            job.done = len(job.events)
            if state.preview_every > 0 and job.done % state.preview_every == 0:
                camera = _preview_camera(CANONICAL_OBJECT_BOUNDS)
                image = render_single(field, camera, 48)
                path = state.preview_dir / f"{job.job_id}-{job.done:06d}.png"
                path.write_bytes(png_bytes(image.pixels))
                job.latest_preview = str(path)

        finetune_color(field, target, config.total_iters, config, guidance=guidance,
                       prompt=prompt, event_sink=sink, cancel_cb=job.cancel.is_set)

        def swap():
            state.registry = registry
        _finish(state, job, swap)
    except Exception as e:
        job.error = str(e)
        job.state = "failed"


def _spawn(job: Job, target, *args) -> None:
    job.thread = threading.Thread(target=target, args=args, daemon=True)
    job.thread.start()


# ---------------------------------------------------------------------------
# app


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="scenekit service")
    app.state.service = state
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"], expose_headers=["X-Opacity-PFM"])

    @app.exception_handler(HTTPException)
    async def _http_exc(request: Request, exc: HTTPException):
        body = exc.detail if isinstance(exc.detail, dict) else {"error": str(exc.detail)}
        return JSONResponse(status_code=exc.status_code, content=body)

    @app.exception_handler(Exception)
    async def _any_exc(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    # -- scene ----------------------------------------------------------------

    @app.get("/api/scene")
    def get_scene():
        scene, _ = state.snapshot()
        return scene_to_json(scene)

    @app.put("/api/scene")
    def put_scene(body=Depends(_json_body)):
        try:
            scene = finalize_scene(scene_from_json(body, base_dir=state.base_dir))
        except SceneValidationError as e:
            _fail(400, "scene failed validation", [str(v) for v in e.violations])
        except SceneFormatError as e:
            _fail(400, str(e))
        with state.lock:
            if state.active_job() is not None:
                _fail(409, "a training job is running; scene is locked")
            old_scene, old_registry = state.scene, state.registry
            fields = {}
            for fid, spec in scene.fields.items():
                keep = (spec.checkpoint is None and fid in old_registry
                        and fid in old_scene.fields
                        and old_scene.fields[fid].channels == spec.channels)
                if keep:
                    fields[fid] = old_registry[fid]
            try:
                loaded = FieldRegistry.from_scene(
                    replace(scene, fields={fid: spec for fid, spec in scene.fields.items()
                                           if fid not in fields}),
                    base_dir=state.base_dir)
            except (CheckpointError, OSError) as e:
                _fail(400, f"checkpoint load failed: {e}")
            for fid, f in loaded.items():
                fields[fid] = f
            state.scene = scene
            state.registry = FieldRegistry(fields)
        return scene_to_json(scene)

    # -- rendering --------------------------------------------------------------

    @app.post("/api/render")
    def post_render(body=Depends(_json_body)):
        camera_json, resolution, n_samples = _render_args(body)
        if "field_id" in (body or {}):
            _fail(400, "unknown key 'field_id' (use /api/render-object)")
        try:
            camera = camera_from_json(camera_json, resolution=resolution)
        except ValueError as e:
            _fail(400, str(e))
        scene, registry = state.snapshot()
        try:
            image = render_composed(scene, registry, camera, n_samples)
        except RenderError as e:
            _fail(400, str(e))
        return _image_response(state, image)

    @app.post("/api/render-object")
    def post_render_object(body=Depends(_json_body)):
        camera_json, resolution, n_samples = _render_args(body)
        field_id = (body or {}).get("field_id")
        if not isinstance(field_id, str):
            _fail(400, "body needs a field_id string")
        try:
            camera = camera_from_json(camera_json, resolution=resolution)
        except ValueError as e:
            _fail(400, str(e))
        _, registry = state.snapshot()
        if field_id not in registry:
            _fail(404, f"no field with id {field_id!r}")
        image = render_single(registry[field_id], camera, n_samples)
        return _image_response(state, image)

    @app.get("/api/renders/{token}/opacity.pfm")
    def get_opacity(token: str):
        with state.lock:
            pfm = state.opacity_store.get(token)
        if pfm is None:
            _fail(404, "no stored opacity for that render")
        return Response(content=pfm, media_type="application/octet-stream")

    # -- edits ------------------------------------------------------------------

    @app.post("/api/edit")
    def post_edit(body=Depends(_json_body)):
        try:
            edit = edit_from_json(body, base_dir=state.base_dir)
        except EditError as e:
            _fail(400, str(e))

        if edit.kind in ("move", "remove", "duplicate"):
            with state.lock:
                if state.active_job() is not None:
                    _fail(409, "a training job is running; placement edits are rejected")
                if edit.proxy_id is not None and not any(
                        p.proxy_id == edit.proxy_id for p in state.scene.proxies):
                    _fail(404, f"no proxy with id {edit.proxy_id!r}")
                try:
                    state.scene = apply_placement_edit(state.scene, edit)
                except EditError as e:
                    _fail(400, str(e))
                return scene_to_json(state.scene)

        with state.lock:
            if state.active_job() is not None:
                _fail(409, "a training job is already running")
            scene, registry = state.scene, state.registry
            if edit.kind == "geometry":
                if edit.proxy_id is None or not any(
                        p.proxy_id == edit.proxy_id for p in scene.proxies):
                    _fail(404, f"no proxy with id {edit.proxy_id!r}")
                if edit.shape is None:
                    _fail(400, "geometry edit needs a shape")
                try:
                    guidance = state.make_guidance()
                except GuidanceConfigError as e:
                    _fail(400, str(e))
                config = replace(_DEFAULT_FINETUNE, seed=scene.seed,
                                 total_iters=edit.steps or _DEFAULT_FINETUNE.total_iters)
                job = state.new_job("finetune_geometry", config.total_iters)
                _spawn(job, _run_geometry, state, job, edit, config, guidance)
                return JSONResponse(status_code=202, content=job.to_json())
            if edit.kind == "color":
                if edit.field_id is None or edit.field_id not in registry:
                    _fail(404, f"no field with id {edit.field_id!r}")
                if not isinstance(registry[edit.field_id], FieldParams):
                    _fail(400, f"field {edit.field_id!r} is not trainable")
                target = None
                guidance = None
                if edit.target is not None:
                    path = Path(edit.target)
                    if not path.is_absolute():
                        path = state.base_dir / path
                    try:
                        arr = read_pfm(path)
                    except (OSError, ValueError) as e:
                        _fail(400, f"color target: {e}")
                    target = arr[:, :, None] if arr.ndim == 2 else arr
                else:
                    try:
                        guidance = state.make_guidance()
                    except GuidanceConfigError as e:
                        _fail(400, str(e))
                config = replace(_DEFAULT_FINETUNE, seed=scene.seed,
                                 total_iters=edit.steps or _DEFAULT_FINETUNE.total_iters)
                job = state.new_job("finetune_color", config.total_iters)
                _spawn(job, _run_color, state, job, edit.field_id, target, guidance,
                       edit.prompt or "", config)
                return JSONResponse(status_code=202, content=job.to_json())
        _fail(400, f"unknown edit kind {edit.kind!r}")

    # -- jobs -------------------------------------------------------------------

    @app.post("/api/jobs/train")
    def post_train(body=Depends(_json_body), preview_every: int | None = None):
        try:
            config = train_config_from_json(body if isinstance(body, dict) else {})
        except (TypeError, ValueError) as e:
            _fail(400, f"bad train config: {e}")
        with state.lock:
            if state.active_job() is not None:
                _fail(409, "a training job is already running")
            try:
                guidance = state.make_guidance()
            except GuidanceConfigError as e:
                _fail(400, str(e))
            if preview_every is not None:
                state.preview_every = max(0, preview_every)
            job = state.new_job("train", config.total_iters)
            _spawn(job, _run_train, state, job, config, guidance)
        return JSONResponse(status_code=202, content=job.to_json())

    def _job_or_404(job_id: str) -> Job:
        job = state.jobs.get(job_id)
        if job is None:
            _fail(404, f"no job with id {job_id!r}")
        return job

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        return _job_or_404(job_id).to_json()

    @app.get("/api/jobs/{job_id}/events")
    def get_job_events(job_id: str):
        job = _job_or_404(job_id)
        return {"job_id": job.job_id, "events": list(job.events)}

    @app.get("/api/jobs/{job_id}/preview")
    def get_job_preview(job_id: str):
        job = _job_or_404(job_id)
        if job.latest_preview is None:
            _fail(404, "no preview frame yet")
        return Response(content=Path(job.latest_preview).read_bytes(),
                        media_type="image/png")

    @app.post("/api/jobs/{job_id}/cancel")
    def cancel_job(job_id: str):
        job = _job_or_404(job_id)
        job.cancel.set()
        return job.to_json()

    # -- fields -------------------------------------------------------------------

    @app.get("/api/fields")
    def get_fields():
        scene, registry = state.snapshot()
        out = {}
        for fid, f in registry.items():
            spec = scene.fields.get(fid)
            if isinstance(f, FieldParams):
                out[fid] = {"kind": "params", "channels": f.channels,
                            "hidden": f.hidden, "levels": f.levels,
                            "checkpoint": spec.checkpoint if spec else None}
            else:
                out[fid] = {"kind": "analytic", "channels": f.channels,
                            "checkpoint": None}
        return {"fields": out}

    return app
