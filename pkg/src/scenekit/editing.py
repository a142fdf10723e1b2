"""Post-training edits.

Placement edits (move / remove / duplicate) are pure scene-value
transformations: no field parameter is read or written, and the next
composed render reflects them immediately. Geometry edits swap a proxy's
shape and fine-tune only that proxy's field (global-step gradients are
computed on the full scene but applied to the target field alone). Color
edits optimize only the albedo head, which shares no parameters with the
density path, so density is preserved bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Any, Mapping

import numpy as np

from .field import FieldParams, FieldRegistry, TENSOR_NAMES
from .guidance import GuidanceError, photometric_guidance
from .render import render_backward, render_composed
from .scene import (CANONICAL_OBJECT_BOUNDS, RigidPlacement, SceneDescription,
                    validate_placement)
from .shapes import ProxyShape, shape_from_json, validate_shape
from .training import (AdamState, ObjectGroup, TrainConfig, TrainEvent,
                       _guidance_rms, _object_scene, adam_update, local_step,
                       global_step, object_groups, sample_camera)

ALBEDO_TENSORS = ("wa1", "ba1", "wa2", "ba2")


class EditError(ValueError):
    pass


@dataclass(frozen=True)
class EditRequest:
    """kind: move | remove | duplicate | geometry | color.

    move/duplicate carry a placement; duplicate needs a fresh new_id;
    geometry carries a shape (and optional fine-tune steps); color names a
    field_id and carries steps.
    """

    kind: str
    proxy_id: str | None = None
    placement: RigidPlacement | None = None
    new_id: str | None = None
    shape: ProxyShape | None = None
    field_id: str | None = None
    steps: int = 0
    # color only: path to a target image, or a prompt for remote guidance
    target: str | None = None
    prompt: str | None = None


def edit_from_json(data: Mapping[str, Any], base_dir=None) -> EditRequest:
    if not isinstance(data, dict) or "kind" not in data:
        raise EditError("edit request must be an object with a 'kind'")
    kind = data["kind"]
    allowed = {
        "move": {"kind", "proxy_id", "placement"},
        "remove": {"kind", "proxy_id"},
        "duplicate": {"kind", "proxy_id", "placement", "new_id"},
        "geometry": {"kind", "proxy_id", "shape", "steps"},
        "color": {"kind", "field_id", "steps", "target", "prompt"},
    }
    if kind not in allowed:
        raise EditError(f"unknown edit kind {kind!r}")
    unknown = set(data) - allowed[kind]
    if unknown:
        raise EditError(f"unknown edit key {sorted(unknown)[0]!r}")
    placement = None
    if "placement" in data:
        p = data["placement"]
        if not isinstance(p, dict):
            raise EditError("placement must be an object")
        bad = set(p) - {"location", "rotation_quat", "scale"}
        if bad:
            raise EditError(f"unknown placement key {sorted(bad)[0]!r}")
        placement = RigidPlacement(
            location=p.get("location", (0.0, 0.0, 0.0)),
            rotation_quat=p.get("rotation_quat", (1.0, 0.0, 0.0, 0.0)),
            scale=p.get("scale", (1.0, 1.0, 1.0)))
        rules = validate_placement(placement)
        if rules:
            raise EditError("; ".join(rules))
    shape = None
    if "shape" in data and data["shape"] is not None:
        try:
            shape = shape_from_json(data["shape"], base_dir=base_dir, where="shape")
        except (ValueError, OSError) as e:
            raise EditError(str(e)) from e
        bad = validate_shape(shape)
        if bad:
            raise EditError("; ".join(bad))
    steps = data.get("steps", 0)
    if not isinstance(steps, int) or steps < 0:
        raise EditError("steps must be a nonnegative integer")
    for key in ("proxy_id", "new_id", "field_id", "target", "prompt"):
        if key in data and not isinstance(data[key], str):
            raise EditError(f"{key} must be a string")
    return EditRequest(kind=kind, proxy_id=data.get("proxy_id"), placement=placement,
                       new_id=data.get("new_id"), shape=shape,
                       field_id=data.get("field_id"), steps=steps,
                       target=data.get("target"), prompt=data.get("prompt"))


# ---------------------------------------------------------------------------
# placement edits


def apply_placement_edit(scene: SceneDescription, edit: EditRequest) -> SceneDescription:
    """Pure transformation of the scene value; never touches fields."""
    if edit.kind == "move":
        if edit.placement is None:
            raise EditError("move needs a placement")
        try:
            proxy = scene.proxy(edit.proxy_id)
        except KeyError as e:
            raise EditError(str(e)) from e
        return scene.with_proxy_replaced(replace(proxy, placement=edit.placement))
    if edit.kind == "remove":
        try:
            idx = scene.proxy_index(edit.proxy_id)
        except KeyError as e:
            raise EditError(str(e)) from e
        proxies = scene.proxies[:idx] + scene.proxies[idx + 1:]
        return replace(scene, proxies=proxies)
    if edit.kind == "duplicate":
        if not edit.new_id:
            raise EditError("duplicate needs a new_id")
        if any(p.proxy_id == edit.new_id for p in scene.proxies):
            raise EditError(f"proxy id {edit.new_id!r} already exists")
        try:
            proxy = scene.proxy(edit.proxy_id)
        except KeyError as e:
            raise EditError(str(e)) from e
        placement = edit.placement if edit.placement is not None else proxy.placement
        dup = replace(proxy, proxy_id=edit.new_id, placement=placement)
        return replace(scene, proxies=scene.proxies + (dup,))
    raise EditError(f"{edit.kind!r} is not a placement edit")


# ---------------------------------------------------------------------------
# geometry fine-tune


def finetune_geometry(scene: SceneDescription, registry: FieldRegistry,
                      proxy_id: str, new_shape: ProxyShape, config: TrainConfig,
                      guidance, event_sink=None,
                      cancel_cb=None) -> tuple[SceneDescription, list[TrainEvent]]:
    """Swaps the proxy's shape, then alternates local steps on the target
    field with global steps masked to it. Every other field is bit-identical
    afterward. Returns the edited scene and the step events."""
    bad = validate_shape(new_shape)
    if bad:
        raise EditError("; ".join(bad))
    try:
        proxy = scene.proxy(proxy_id)
    except KeyError as e:
        raise EditError(str(e)) from e
    field = registry[proxy.field_id] if proxy.field_id in registry else None
    if not isinstance(field, FieldParams):
        raise EditError(f"field {proxy.field_id!r} is not trainable")
    scene = scene.with_proxy_replaced(replace(proxy, shape=new_shape))

    rng = np.random.Generator(np.random.PCG64(config.seed))
    states = {g.field_id: AdamState.for_params(registry[g.field_id])
              for g in object_groups(scene, registry)}
    target_group = ObjectGroup(proxy.field_id, tuple(
        p for p in scene.proxies if p.field_id == proxy.field_id))
    global_block = config.resolved_global_block()
    events: list[TrainEvent] = []

    def emit(event: TrainEvent) -> bool:
        events.append(event)
        if event_sink is not None:
            event_sink(event)
        return len(events) >= config.total_iters or (cancel_cb is not None
                                                     and cancel_cb())

    done = config.total_iters <= 0
    while not done:
        for _ in range(config.local_block):
            done = emit(local_step(target_group, registry, config, guidance,
                                   rng, len(events), states, scene))
            if done:
                break
        for _ in range(global_block):
            if done:
                break
            done = emit(global_step(scene, registry, config, guidance, rng,
                                    len(events), states,
                                    update_fields={proxy.field_id}))
    return scene, events


# ---------------------------------------------------------------------------
# color fine-tune


def _mask_to_albedo(grad) -> None:
    for name in TENSOR_NAMES:
        if name not in ALBEDO_TENSORS:
            getattr(grad, name)[...] = 0.0


def finetune_color(field: FieldParams, guidance_target: np.ndarray | None, steps: int,
                   config: TrainConfig, guidance=None, prompt: str = "",
                   event_sink=None, cancel_cb=None) -> list[TrainEvent]:
    """Optimizes only the albedo head; trunk and density head stay
    bit-identical, so density output is unchanged everywhere. Updates the
    field in place.

    Steers toward a photometric target image rendered in the canonical
    frame, or toward an arbitrary guidance handle (object scope) when one
    is given instead.
    """
    if guidance_target is None and guidance is None:
        raise EditError("color fine-tune needs a target image or a guidance handle")
    target = None if guidance_target is None else np.asarray(guidance_target, dtype=np.float32)
    # an explicit target defines the raster; (H, W, C) -> (W, H)
    resolution = (config.render_resolution if target is None
                  else (target.shape[1], target.shape[0]))
    rng = np.random.Generator(np.random.PCG64(config.seed))
    local = _object_scene("field", field.channels, CANONICAL_OBJECT_BOUNDS)
    registry = FieldRegistry({"field": field})
    state = AdamState.for_params(field)
    events: list[TrainEvent] = []

    def emit(event: TrainEvent) -> bool:
        events.append(event)
        if event_sink is not None:
            event_sink(event)
        return cancel_cb is not None and cancel_cb()

    for it in range(steps):
        start = time.perf_counter()
        camera = sample_camera(config.camera, "object", rng, resolution=resolution)
        image = render_composed(local, registry, camera, config.n_samples_per_ray)
        try:
            if target is not None:
                g = photometric_guidance(image.pixels, target)
            else:
                g = guidance.gradient(image.pixels, prompt, it, scope="object",
                                      object_id="field")
        except GuidanceError as e:
            if emit(TrainEvent(it, "local", "field", 0.0, 0.0,
                               (time.perf_counter() - start) * 1e3,
                               skipped=True, error=str(e))):
                break
            continue
        cot = g.gradient.astype(np.float64) * g.scale
        grads = render_backward(local, registry, camera, config.n_samples_per_ray, cot)
        grad = grads["field"]
        _mask_to_albedo(grad)
        adam_update(field, grad, state, config.lr, config.adam_betas)
        if emit(TrainEvent(it, "local", "field", _guidance_rms(g.gradient),
                           0.0, (time.perf_counter() - start) * 1e3)):
            break
    return events
