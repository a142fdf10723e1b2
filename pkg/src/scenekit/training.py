"""Interleaved global-local training.

The schedule repeats passes of {for each object group, in proxy order:
`local_block` local steps on that group's field, then `global_block` global
steps on the composed scene} until `total_iters` step events have been
emitted. An object group is the set of proxies sharing one trainable field;
its local steps render the field alone in its canonical frame.

Local steps use the group's object prompt (first proxy wins, scene prompt
as fallback); global steps use the scene prompt. Both add the banded
shape-prior gradient for every shaped proxy they touch, sampled in that
proxy's canonical frame. A field bound to several proxies receives one
optimizer update per global step with the gradient summed over its proxies'
samples.

Determinism: one generator seeded from the config drives camera draws and
shape-loss sampling in a fixed order (camera first), with midpoint depth
sampling, so a fixed seed reproduces checkpoints bit for bit.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field as dataclass_field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .field import FieldParams, FieldRegistry, ParamGradient, TENSOR_NAMES
from .geometry import AABB
from .guidance import GuidanceError
from .render import Camera, camera_look_at, render_backward, render_composed
from .scene import FieldSpec, ObjectProxy, SceneDescription
from .shape_prior import ShapeLossConfig, shape_loss


@dataclass(frozen=True)
class CameraDistribution:
    """Orbit-pose distribution. Draw order per camera: azimuth, elevation,
    radius (all uniform; collapsed ranges still consume their draw, so
    narrowing a range never shifts the rest of the stream)."""

    radius_range: tuple[float, float] = (2.5, 3.5)
    elevation_range: tuple[float, float] = (0.15, 0.75)  # radians above horizon
    azimuth_range: tuple[float, float] = (0.0, 2.0 * math.pi)
    fov: float = math.pi / 3

    def __post_init__(self):
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ValueError("radius range must satisfy 0 < min <= max")


def sample_camera(dist: CameraDistribution, mode: str, rng: np.random.Generator,
                  resolution: tuple[int, int] = (64, 64),
                  scene_bounds: AABB | None = None) -> Camera:
    """Random orbit camera. mode 'object' looks at the origin; mode 'scene'
    looks at the scene-bounds center."""
    azim = rng.uniform(dist.azimuth_range[0], dist.azimuth_range[1])
    elev = rng.uniform(dist.elevation_range[0], dist.elevation_range[1])
    radius = rng.uniform(dist.radius_range[0], dist.radius_range[1])
    if mode == "object":
        look_at = np.zeros(3)
    elif mode == "scene":
        if scene_bounds is None:
            raise ValueError("scene mode needs scene bounds")
        look_at = scene_bounds.center
    else:
        raise ValueError(f"unknown camera mode {mode!r}")
    offset = radius * np.array([math.cos(elev) * math.sin(azim),
                                math.sin(elev),
                                math.cos(elev) * math.cos(azim)])
    return camera_look_at(look_at + offset, look_at, fov_y=dist.fov,
                          resolution=resolution)


@dataclass(frozen=True)
class TrainConfig:
    total_iters: int = 15000
    global_fraction: float = 1.0 / 3.0
    local_block: int = 10
    global_block: int | None = None  # derived from global_fraction when None
    lr: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.99)
    render_resolution: tuple[int, int] = (64, 64)
    n_samples_per_ray: int = 64
    shape_loss: ShapeLossConfig = dataclass_field(default_factory=ShapeLossConfig)
    camera: CameraDistribution = dataclass_field(default_factory=CameraDistribution)
    seed: int = 0
    checkpoint_interval: int = 0  # 0 disables periodic checkpoints

    def __post_init__(self):
        if self.local_block < 1:
            raise ValueError("local_block must be >= 1")
        if not 0.0 <= self.global_fraction < 1.0:
            raise ValueError("global_fraction must be in [0, 1)")
        if not self.lr > 0:
            raise ValueError("lr must be positive")

    def resolved_global_block(self) -> int:
        if self.global_block is not None:
            return self.global_block
        # per-object pass unit: local_block locals then g globals, so the
        # global fraction is g / (local_block + g)
        return round(self.local_block * self.global_fraction / (1.0 - self.global_fraction))


def train_config_from_json(data: Mapping) -> TrainConfig:
    """Strict config parsing; nested objects 'shape_loss' and 'camera'."""
    data = dict(data)
    kw = {}
    nested = {"shape_loss": ShapeLossConfig, "camera": CameraDistribution}
    simple = {f for f in TrainConfig.__dataclass_fields__ if f not in nested}
    for key, value in data.items():
        if key in nested:
            sub = dict(value)
            cls = nested[key]
            unknown = set(sub) - set(cls.__dataclass_fields__)
            if unknown:
                raise ValueError(f"unknown {key} config key {sorted(unknown)[0]!r}")
            for tup in ("radius_range", "elevation_range", "azimuth_range"):
                if tup in sub:
                    sub[tup] = tuple(sub[tup])
            kw[key] = cls(**sub)
        elif key in simple:
            if key in ("adam_betas", "render_resolution") and value is not None:
                value = tuple(value)
            kw[key] = value
        else:
            raise ValueError(f"unknown train config key {key!r}")
    return TrainConfig(**kw)


def train_config_to_json(config: TrainConfig) -> dict:
    return asdict(config)


# ---------------------------------------------------------------------------
# Adam


@dataclass(eq=False)
class AdamState:
    m: ParamGradient
    v: ParamGradient
    step: int = 0

    @classmethod
    def for_params(cls, params: FieldParams) -> "AdamState":
        return cls(m=ParamGradient.zeros_like(params), v=ParamGradient.zeros_like(params))


def adam_update(params: FieldParams, grad: ParamGradient, state: AdamState,
                lr: float, betas: tuple[float, float] = (0.9, 0.99),
                eps: float = 1e-8) -> None:
    """Standard Adam with bias correction, in place."""
    b1, b2 = betas
    state.step += 1
    t = state.step
    for name in TENSOR_NAMES:
        g = getattr(grad, name)
        m = getattr(state.m, name)
        v = getattr(state.v, name)
        m[...] = b1 * m + (1.0 - b1) * g
        v[...] = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p = getattr(params, name)
        p[...] = p - lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class TrainEvent:
    iter: int
    kind: str  # "local" | "global"
    object_id: str | None  # group field id for local steps
    guidance_norm: float
    shape_loss: float
    wall_ms: float
    skipped: bool = False
    error: str | None = None

    def to_json(self) -> dict:
        out = {"iter": self.iter, "kind": self.kind, "object_id": self.object_id,
               "losses": {"guidance_norm": self.guidance_norm, "shape": self.shape_loss},
               "wall_ms": self.wall_ms, "skipped": self.skipped}
        if self.error is not None:
            out["error"] = self.error
        return out


class EventLogWriter:
    """Appends one JSON line per event; usable as an event sink."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def __call__(self, event: TrainEvent) -> None:
        self._fh.write(json.dumps(event.to_json()) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


# ---------------------------------------------------------------------------
# object groups


@dataclass(frozen=True)
class ObjectGroup:
    """Proxies sharing one trainable field; local steps train it alone."""

    field_id: str
    proxies: tuple[ObjectProxy, ...]

    @property
    def prompt_proxy(self) -> ObjectProxy:
        return self.proxies[0]


def object_groups(scene: SceneDescription, registry: FieldRegistry) -> list[ObjectGroup]:
    order: list[str] = []
    members: dict[str, list[ObjectProxy]] = {}
    for proxy in scene.proxies:
        if proxy.field_id not in registry:
            continue
        if not isinstance(registry[proxy.field_id], FieldParams):
            continue
        if proxy.field_id not in members:
            order.append(proxy.field_id)
            members[proxy.field_id] = []
        members[proxy.field_id].append(proxy)
    return [ObjectGroup(fid, tuple(members[fid])) for fid in order]


def _object_scene(field_id: str, channels: int, bounds: AABB,
                  prompt: str = "") -> SceneDescription:
    """Synthetic one-proxy identity scene used for canonical-frame steps;
    matches what render_single builds, so local and global math coincide
    on single-proxy scenes."""
    return SceneDescription(
        proxies=(ObjectProxy(proxy_id=field_id, field_id=field_id, object_prompt=prompt),),
        bounds=bounds,
        fields={field_id: FieldSpec(checkpoint=None, channels=channels)},
    )


# ---------------------------------------------------------------------------
# steps


def _guidance_rms(gradient: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(gradient, dtype=np.float64))))


def _apply_shape_losses(proxies, registry, config: TrainConfig, rng,
                        grads: dict[str, ParamGradient], object_bounds: AABB) -> float:
    """Adds per-proxy shape gradients (in proxy order) into grads; returns
    the summed weighted loss. Proxies without a shape draw nothing."""
    total = 0.0
    if config.shape_loss.weight == 0.0:
        return total
    for proxy in proxies:
        if proxy.shape is None or proxy.shape_weight == 0.0:
            continue
        field = registry[proxy.field_id]
        if not isinstance(field, FieldParams):
            continue
        loss, grad = shape_loss(field, proxy.shape, config.shape_loss, rng,
                                bounds=object_bounds)
        total += proxy.shape_weight * loss
        if grad is not None and proxy.field_id in grads:
            grads[proxy.field_id].add_(grad.scale_(proxy.shape_weight))
    return total


def local_step(group: ObjectGroup, registry: FieldRegistry, config: TrainConfig,
               guidance, rng: np.random.Generator, iter_no: int,
               states: dict[str, AdamState], scene: SceneDescription) -> TrainEvent:
    """One canonical-frame step on the group's field. No other field's
    parameters change."""
    start = time.perf_counter()
    field = registry[group.field_id]
    camera = sample_camera(config.camera, "object", rng,
                           resolution=config.render_resolution)
    local = _object_scene(group.field_id, field.channels, scene.object_bounds)
    image = render_composed(local, registry, camera, config.n_samples_per_ray)
    prompt = group.prompt_proxy.object_prompt or scene.scene_prompt
    try:
        g = guidance.gradient(image.pixels, prompt, iter_no, scope="object",
                              object_id=group.field_id)
    except GuidanceError as e:
        return TrainEvent(iter_no, "local", group.field_id, 0.0, 0.0,
                          (time.perf_counter() - start) * 1e3, skipped=True, error=str(e))
    cot = g.gradient.astype(np.float64) * g.scale
    grads = render_backward(local, registry, camera, config.n_samples_per_ray, cot)
    shape_total = _apply_shape_losses([group.prompt_proxy], registry, config, rng,
                                      grads, scene.object_bounds)
    adam_update(field, grads[group.field_id], states[group.field_id],
                config.lr, config.adam_betas)
    return TrainEvent(iter_no, "local", group.field_id, _guidance_rms(g.gradient),
                      shape_total, (time.perf_counter() - start) * 1e3)


def global_step(scene: SceneDescription, registry: FieldRegistry, config: TrainConfig,
                guidance, rng: np.random.Generator, iter_no: int,
                states: dict[str, AdamState],
                update_fields: set[str] | None = None) -> TrainEvent:
    """One composed-scene step. Every trainable bound field gets one update
    with its summed gradient; update_fields restricts which fields the
    update is applied to (gradients are still computed on the full scene)."""
    start = time.perf_counter()
    camera = sample_camera(config.camera, "scene", rng,
                           resolution=config.render_resolution,
                           scene_bounds=scene.bounds)
    image = render_composed(scene, registry, camera, config.n_samples_per_ray)
    try:
        g = guidance.gradient(image.pixels, scene.scene_prompt, iter_no, scope="scene")
    except GuidanceError as e:
        return TrainEvent(iter_no, "global", None, 0.0, 0.0,
                          (time.perf_counter() - start) * 1e3, skipped=True, error=str(e))
    cot = g.gradient.astype(np.float64) * g.scale
    grads = render_backward(scene, registry, camera, config.n_samples_per_ray, cot)
    shape_total = _apply_shape_losses(scene.proxies, registry, config, rng,
                                      grads, scene.object_bounds)
    for group in object_groups(scene, registry):
        if update_fields is not None and group.field_id not in update_fields:
            continue
        adam_update(registry[group.field_id], grads[group.field_id],
                    states[group.field_id], config.lr, config.adam_betas)
    return TrainEvent(iter_no, "global", None, _guidance_rms(g.gradient),
                      shape_total, (time.perf_counter() - start) * 1e3)


# ---------------------------------------------------------------------------
# the loop


def schedule_kinds(n_groups: int, local_block: int, global_block: int,
                   total_iters: int) -> list[str]:
    """Closed-form event-kind sequence ('L<i>' / 'G'), for schedule tests."""
    out: list[str] = []
    if n_groups == 0:
        return ["G"] * total_iters
    while len(out) < total_iters:
        for g in range(n_groups):
            out.extend([f"L{g}"] * min(local_block, total_iters - len(out)))
            out.extend(["G"] * min(global_block, total_iters - len(out)))
            if len(out) >= total_iters:
                break
    return out


def train(scene: SceneDescription, config: TrainConfig, guidance,
          registry: FieldRegistry | None = None,
          base_dir: str | Path | None = None,
          event_sink: Callable[[TrainEvent], None] | None = None,
          checkpoint_dir: str | Path | None = None,
          cancel_cb: Callable[[], bool] | None = None) -> tuple[FieldRegistry, list[TrainEvent]]:
    """Runs the interleaved schedule for config.total_iters step events.

    Returns the trained registry and the full event list. event_sink (if
    given) sees each event as it is emitted; cancel_cb is polled between
    steps and stops the loop early when it returns True.
    """
    if registry is None:
        registry = FieldRegistry.from_scene(scene, base_dir=base_dir)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    groups = object_groups(scene, registry)
    states = {g.field_id: AdamState.for_params(registry[g.field_id]) for g in groups}
    global_block = config.resolved_global_block()
    events: list[TrainEvent] = []

    def emit(event: TrainEvent) -> bool:
        events.append(event)
        if event_sink is not None:
            event_sink(event)
        if (checkpoint_dir is not None and config.checkpoint_interval > 0
                and (len(events) % config.checkpoint_interval == 0)):
            registry.save_all(scene, checkpoint_dir)
        return len(events) >= config.total_iters or (cancel_cb is not None and cancel_cb())

    done = config.total_iters <= 0
    while not done:
        if not groups:
            done = emit(global_step(scene, registry, config, guidance, rng,
                                    len(events), states))
            continue
        for group in groups:
            for _ in range(config.local_block):
                done = emit(local_step(group, registry, config, guidance, rng,
                                       len(events), states, scene))
                if done:
                    break
            if done:
                break
            for _ in range(global_block):
                done = emit(global_step(scene, registry, config, guidance, rng,
                                        len(events), states))
                if done:
                    break
            if done:
                break
    if checkpoint_dir is not None:
        registry.save_all(scene, checkpoint_dir)
    return registry, events
