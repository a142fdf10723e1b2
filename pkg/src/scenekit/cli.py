"""Command line front end.

Exit codes: 0 success, 1 validation or config error, 2 runtime failure.
Expected failures print one-line messages, not stack traces.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .editing import (EditError, apply_placement_edit, edit_from_json,
                      finetune_color, finetune_geometry)
from .field import CheckpointError, FieldRegistry
from .guidance import GuidanceConfig, GuidanceConfigError, GuidanceError, select_guidance
from .images import read_pfm, save_render
from .render import RenderError, camera_look_at, render_composed, render_single
from .scene import (SceneDescription, SceneFormatError, SceneValidationError,
                    load_scene, save_scene, scene_to_json)
from .training import EventLogWriter, TrainConfig, train, train_config_from_json

_TEMPLATE = {
    "scene_prompt": "a red ball next to a wooden crate",
    "bounds": {"min": [-1.5, -1.5, -1.5], "max": [1.5, 1.5, 1.5]},
    "seed": 0,
    "fields": {
        "f_ball": {"checkpoint": None, "channels": 3},
        "f_crate": {"checkpoint": None, "channels": 3},
    },
    "proxies": [
        {
            "id": "ball",
            "field": "f_ball",
            "location": [-0.6, 0.0, 0.0],
            "rotation_quat": [1.0, 0.0, 0.0, 0.0],
            "scale": [0.5, 0.5, 0.5],
            "prompt": "a red rubber ball",
            "shape": {"type": "sphere", "radius": 1.0},
            "shape_weight": 1.0,
        },
        {
            "id": "crate",
            "field": "f_crate",
            "location": [0.6, 0.0, 0.0],
            "rotation_quat": [1.0, 0.0, 0.0, 0.0],
            "scale": [0.5, 0.5, 0.5],
            "prompt": "a wooden crate",
            "shape": {"type": "box", "half_extents": [0.9, 0.9, 0.9]},
            "shape_weight": 1.0,
        },
    ],
}

_USER_ERRORS = (SceneFormatError, SceneValidationError, EditError,
                GuidanceConfigError, CheckpointError, RenderError, ValueError)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _vec3(text: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad vector {text!r}") from None


def _res(text: str) -> tuple[int, int]:
    w, sep, h = text.partition("x")
    if not sep:
        raise argparse.ArgumentTypeError("expected WIDTHxHEIGHT")
    try:
        res = (int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad resolution {text!r}") from None
    if res[0] < 1 or res[1] < 1:
        raise argparse.ArgumentTypeError("resolution must be at least 1x1")
    return res


def _camera_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eye", type=_vec3, default=None,
                   help="camera position x,y,z (default: an orbit pose)")
    p.add_argument("--look-at", type=_vec3, default=None,
                   help="camera target x,y,z (default: bounds center)")
    p.add_argument("--fov-deg", type=float, default=60.0, help="vertical FOV in degrees")
    p.add_argument("--resolution", type=_res, default=(128, 128), help="WIDTHxHEIGHT")
    p.add_argument("--samples", type=int, default=96, help="depth samples per ray")


def _camera_for(args, bounds) -> "Camera":
    center = bounds.center
    if args.look_at is not None:
        center = np.asarray(args.look_at, dtype=np.float64)
    if args.eye is not None:
        eye = np.asarray(args.eye, dtype=np.float64)
    else:
        # default pose: above the +z rim, far enough to see all of bounds
        radius = 2.2 * float(np.max(bounds.extent))
        eye = center + radius * np.array([0.4, 0.45, 0.8])
    fov = math.radians(args.fov_deg)
    return camera_look_at(eye, center, fov_y=fov, resolution=args.resolution)


def _guidance_from_args(args):
    spec = getattr(args, "guidance", None)
    if spec is None:
        env = os.environ.get("SCENEKIT_GUIDANCE_URL")
        if env:
            spec = f"remote:{env}"
    if spec is None:
        raise GuidanceConfigError(
            "no guidance configured: pass --guidance photometric:TARGET or "
            "remote:URL (or set SCENEKIT_GUIDANCE_URL)")
    return select_guidance(GuidanceConfig.from_string(spec))


def _load_train_config(args) -> TrainConfig:
    if args.config is not None:
        with open(args.config, encoding="utf-8") as f:
            data = json.load(f)
        config = train_config_from_json(data)
    else:
        config = TrainConfig()
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace
        config = replace(config, seed=args.seed)
    return config


# ---------------------------------------------------------------------------
# subcommands


def _cmd_init(args) -> int:
    path = Path(args.scene)
    if path.exists() and not args.force:
        _err(f"{path} already exists (use --force to overwrite)")
        return 1
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_TEMPLATE, indent=2) + "\n", encoding="utf-8")
    print(f"wrote template scene to {path}")
    return 0


def _cmd_validate(args) -> int:
    scene = load_scene(args.scene)
    print(f"scene OK: {len(scene.proxies)} proxies, {len(scene.fields)} fields")
    return 0


def _cmd_render(args) -> int:
    scene = load_scene(args.scene)
    registry = FieldRegistry.from_scene(scene, base_dir=Path(args.scene).parent)
    camera = _camera_for(args, scene.bounds)
    image = render_composed(scene, registry, camera, args.samples)
    for p in save_render(image, args.out):
        print(f"wrote {p}")
    return 0


def _cmd_render_object(args) -> int:
    scene = load_scene(args.scene)
    registry = FieldRegistry.from_scene(scene, base_dir=Path(args.scene).parent)
    if args.field not in registry:
        _err(f"no field with id {args.field!r}")
        return 1
    from .scene import CANONICAL_OBJECT_BOUNDS
    camera = _camera_for(args, CANONICAL_OBJECT_BOUNDS)
    image = render_single(registry[args.field], camera, args.samples)
    for p in save_render(image, args.out):
        print(f"wrote {p}")
    return 0


def _cmd_train(args) -> int:
    scene = load_scene(args.scene)
    config = _load_train_config(args)
    guidance = _guidance_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = EventLogWriter(out / "events.jsonl")
    try:
        registry, events = train(scene, config, guidance,
                                 base_dir=Path(args.scene).parent,
                                 event_sink=log, checkpoint_dir=out)
    finally:
        log.close()
    written = registry.save_all(scene, out)
    from dataclasses import replace
    from .scene import FieldSpec
    fields = {fid: FieldSpec(checkpoint=written.get(fid, spec.checkpoint),
                             channels=spec.channels)
              for fid, spec in scene.fields.items()}
    save_scene(replace(scene, fields=fields), out / "scene.json")
    skipped = sum(1 for e in events if e.skipped)
    print(f"trained {len(events)} steps ({skipped} skipped); "
          f"checkpoints and scene.json in {out}")
    return 0


def _cmd_edit(args) -> int:
    scene = load_scene(args.scene)
    base_dir = Path(args.scene).parent
    with open(args.edit, encoding="utf-8") as f:
        edit = edit_from_json(json.load(f), base_dir=base_dir)
    out_scene = Path(args.out) if args.out else Path(args.scene)

    if edit.kind in ("move", "remove", "duplicate"):
        scene = apply_placement_edit(scene, edit)
        save_scene(scene, out_scene)
        print(f"applied {edit.kind} edit; wrote {out_scene}")
        return 0

    registry = FieldRegistry.from_scene(scene, base_dir=base_dir)
    config = _load_train_config(args)
    if edit.steps > 0:
        from dataclasses import replace
        config = replace(config, total_iters=edit.steps)

    if edit.kind == "geometry":
        guidance = _guidance_from_args(args)
        scene, events = finetune_geometry(scene, registry, edit.proxy_id,
                                          edit.shape, config, guidance)
    elif edit.kind == "color":
        field = registry[edit.field_id] if edit.field_id in registry else None
        if field is None:
            _err(f"no field with id {edit.field_id!r}")
            return 1
        target = None
        guidance = None
        if edit.target is not None:
            arr = read_pfm(Path(edit.target) if Path(edit.target).is_absolute()
                           else base_dir / edit.target)
            target = arr[:, :, None] if arr.ndim == 2 else arr
        else:
            guidance = _guidance_from_args(args)
        events = finetune_color(field, target, config.total_iters, config,
                                guidance=guidance, prompt=edit.prompt or "")
    else:
        _err(f"unknown edit kind {edit.kind!r}")
        return 1

    ckpt_dir = out_scene.parent
    written = registry.save_all(scene, ckpt_dir)
    from dataclasses import replace
    from .scene import FieldSpec
    fields = {fid: FieldSpec(checkpoint=written.get(fid, spec.checkpoint),
                             channels=spec.channels)
              for fid, spec in scene.fields.items()}
    save_scene(replace(scene, fields=fields), out_scene)
    skipped = sum(1 for e in events if e.skipped)
    print(f"applied {edit.kind} fine-tune ({len(events)} steps, {skipped} skipped); "
          f"wrote {out_scene}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceState, create_app
    guidance_spec = args.guidance
    if guidance_spec is None and os.environ.get("SCENEKIT_GUIDANCE_URL"):
        guidance_spec = "remote:" + os.environ["SCENEKIT_GUIDANCE_URL"]
    state = ServiceState.from_paths(args.scene, guidance_spec=guidance_spec)
    app = create_app(state)
    print(f"serving scene {args.scene} on port {args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenekit",
                                     description="composable neural-field scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="write a template scene file")
    p.add_argument("--scene", required=True, help="path to write")
    p.add_argument("--force", action="store_true", help="overwrite an existing file")
    p.set_defaults(func=_cmd_init)

    p = sub.add_parser("validate", help="check a scene file")
    p.add_argument("--scene", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("render", help="render the composed scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", default="render.png", help="output .png or .pfm")
    _camera_args(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("render-object", help="render one field in its own frame")
    p.add_argument("--scene", required=True)
    p.add_argument("--field", required=True, help="field id to render")
    p.add_argument("--out", default="object.png")
    _camera_args(p)
    p.set_defaults(func=_cmd_render_object)

    p = sub.add_parser("train", help="run the interleaved training loop")
    p.add_argument("--scene", required=True)
    p.add_argument("--config", default=None, help="train config JSON path")
    p.add_argument("--guidance", default=None,
                   help="photometric:TARGET or remote:URL")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("edit", help="apply an edit request")
    p.add_argument("--scene", required=True)
    p.add_argument("--edit", required=True, help="edit request JSON path")
    p.add_argument("--out", default=None, help="output scene path (default: in place)")
    p.add_argument("--config", default=None, help="train config JSON for fine-tunes")
    p.add_argument("--guidance", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--scene", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--guidance", default=None)
    p.set_defaults(func=_cmd_serve)
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        _err(f"file not found: {e.filename or e}")
        return 1
    except _USER_ERRORS as e:
        _err(str(e))
        return 1
    except GuidanceError as e:
        _err(f"guidance failure: {e}")
        return 2
    except OSError as e:
        _err(str(e))
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
