"""Scene model: proxy placements, scene descriptions, scene<->object
transforms, validation, and the JSON scene file format.

A scene is an ordered list of object proxies. Each proxy binds a neural field
(by field id; several proxies may share one), a rigid placement with per-axis
scale, a text prompt, and an optional shape prior. Proxy order is meaningful:
it defines the index k used when render samples are partitioned round-robin
across proxies.

Scene descriptions are immutable values; editing operations build new ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .geometry import AABB, IDENTITY_QUAT, quat_normalize, quat_to_matrix
from .shapes import ProxyShape, shape_from_json, shape_to_json, validate_shape

QUAT_NORM_TOL = 1e-4

CANONICAL_OBJECT_BOUNDS = AABB.cube(1.0)  # fields are always queried in [-1,1]^3


class SceneFormatError(ValueError):
    """Malformed scene JSON: parse errors, unknown keys, type mismatches."""


class SceneValidationError(ValueError):
    """Scene parsed but violates model invariants."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class Violation:
    proxy_id: str | None  # None for scene-level rules
    rule: str

    def __str__(self):
        where = self.proxy_id if self.proxy_id is not None else "scene"
        return f"{where}: {self.rule}"


def _vec(x, n: int) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64).reshape(-1)
    if a.shape != (n,):
        raise ValueError(f"expected a {n}-vector, got shape {a.shape}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RigidPlacement:
    """Location, rotation (unit quaternion, wxyz), and per-axis scale."""

    location: Any = (0.0, 0.0, 0.0)
    rotation_quat: Any = tuple(IDENTITY_QUAT)
    scale: Any = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "location", _vec(self.location, 3))
        object.__setattr__(self, "rotation_quat", _vec(self.rotation_quat, 4))
        object.__setattr__(self, "scale", _vec(self.scale, 3))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation_quat)

    def normalized(self) -> "RigidPlacement":
        return replace(self, rotation_quat=quat_normalize(self.rotation_quat))

    def __eq__(self, other):
        return (isinstance(other, RigidPlacement)
                and np.array_equal(self.location, other.location)
                and np.array_equal(self.rotation_quat, other.rotation_quat)
                and np.array_equal(self.scale, other.scale))


IDENTITY_PLACEMENT = RigidPlacement()


@dataclass(frozen=True, eq=False)
class ObjectProxy:
    proxy_id: str
    field_id: str
    placement: RigidPlacement = IDENTITY_PLACEMENT
    object_prompt: str = ""
    shape: ProxyShape | None = None
    shape_weight: float = 1.0

    def __eq__(self, other):
        return (isinstance(other, ObjectProxy)
                and self.proxy_id == other.proxy_id
                and self.field_id == other.field_id
                and self.placement == other.placement
                and self.object_prompt == other.object_prompt
                and self.shape is other.shape
                and self.shape_weight == other.shape_weight)


@dataclass(frozen=True)
class FieldSpec:
    """Registry entry for one neural field: checkpoint path + channel count."""

    checkpoint: str | None = None
    channels: int = 3


@dataclass(frozen=True, eq=False)
class SceneDescription:
    proxies: tuple[ObjectProxy, ...] = ()
    scene_prompt: str = ""
    bounds: AABB = AABB.cube(1.0)
    fields: Mapping[str, FieldSpec] = None  # type: ignore[assignment]
    seed: int = 0
    object_bounds: AABB = CANONICAL_OBJECT_BOUNDS  # not serialized

    def __post_init__(self):
        object.__setattr__(self, "proxies", tuple(self.proxies))
        fields = dict(self.fields) if self.fields else {}
        object.__setattr__(self, "fields", fields)

    def proxy(self, proxy_id: str) -> ObjectProxy:
        for p in self.proxies:
            if p.proxy_id == proxy_id:
                return p
        raise KeyError(f"no proxy with id {proxy_id!r}")

    def proxy_index(self, proxy_id: str) -> int:
        for i, p in enumerate(self.proxies):
            if p.proxy_id == proxy_id:
                return i
        raise KeyError(f"no proxy with id {proxy_id!r}")

    def with_proxy_replaced(self, proxy: ObjectProxy) -> "SceneDescription":
        idx = self.proxy_index(proxy.proxy_id)
        proxies = self.proxies[:idx] + (proxy,) + self.proxies[idx + 1:]
        return replace(self, proxies=proxies)


# ---------------------------------------------------------------------------
# transforms


def scene_to_object(placement: RigidPlacement, p: np.ndarray) -> np.ndarray:
    """Map scene-space point(s) into the proxy's canonical frame:
    x' = diag(1/scale) . R^T . (x - location)."""
    p = np.asarray(p, dtype=np.float64)
    r = placement.rotation_matrix()
    return ((p - placement.location) @ r) / placement.scale


def object_to_scene(placement: RigidPlacement, p: np.ndarray) -> np.ndarray:
    """Inverse of scene_to_object: x = R . (scale * x') + location."""
    p = np.asarray(p, dtype=np.float64)
    return (p * placement.scale) @ placement.rotation_matrix().T + placement.location


# ---------------------------------------------------------------------------
# validation


def validate_placement(placement: RigidPlacement) -> list[str]:
    bad: list[str] = []
    values = np.concatenate([placement.location, placement.rotation_quat, placement.scale])
    if not np.all(np.isfinite(values)):
        bad.append("nonfinite placement value")
        return bad
    if not np.all(placement.scale > 0):
        bad.append("nonpositive scale")
    norm = float(np.linalg.norm(placement.rotation_quat))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        bad.append(f"rotation quaternion norm {norm:.6g} out of tolerance")
    return bad


def validate_scene(scene: SceneDescription) -> list[Violation]:
    """Checks every model invariant; returns violations, never raises."""
    out: list[Violation] = []
    if not scene.bounds.has_positive_extent():
        out.append(Violation(None, "scene bounds must have positive extent"))
    if not scene.object_bounds.has_positive_extent():
        out.append(Violation(None, "object bounds must have positive extent"))
    if not (isinstance(scene.seed, (int, np.integer)) and scene.seed >= 0):
        out.append(Violation(None, "seed must be a nonnegative integer"))
    for fid, spec in scene.fields.items():
        if spec.channels < 1:
            out.append(Violation(None, f"field {fid!r}: channels must be >= 1"))

    seen: set[str] = set()
    for proxy in scene.proxies:
        if proxy.proxy_id in seen:
            out.append(Violation(proxy.proxy_id, "duplicate proxy id"))
        seen.add(proxy.proxy_id)
        for rule in validate_placement(proxy.placement):
            out.append(Violation(proxy.proxy_id, rule))
        if proxy.field_id not in scene.fields:
            out.append(Violation(proxy.proxy_id, f"unknown field id {proxy.field_id!r}"))
        if not proxy.shape_weight >= 0:
            out.append(Violation(proxy.proxy_id, "negative shape weight"))
        if proxy.shape is not None:
            for rule in validate_shape(proxy.shape):
                out.append(Violation(proxy.proxy_id, rule))
    return out


# ---------------------------------------------------------------------------
# JSON scene format
#
# {
#   "scene_prompt": str,
#   "bounds": {"min": [3 floats], "max": [3 floats]},
#   "seed": uint,
#   "fields": {field_id: {"checkpoint": path-or-null, "channels": uint}},
#   "proxies": [{"id", "field", "location", "rotation_quat" (wxyz), "scale",
#                "prompt", "shape": null | shape object, "shape_weight"}]
# }
#
# Strict: unknown keys rejected with their JSON path; NaN/Inf rejected.

_TOP_KEYS = {"scene_prompt", "bounds", "seed", "fields", "proxies"}
_PROXY_KEYS = {"id", "field", "location", "rotation_quat", "scale", "prompt",
               "shape", "shape_weight"}
_FIELD_KEYS = {"checkpoint", "channels"}


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SceneFormatError(f"{where}.{sorted(unknown)[0]}: unknown key")


def _num_list(obj: Any, n: int, where: str) -> list[float]:
    if not isinstance(obj, list) or len(obj) != n:
        raise SceneFormatError(f"{where}: expected an array of {n} numbers")
    vals = []
    for i, x in enumerate(obj):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise SceneFormatError(f"{where}[{i}]: expected a number")
        if not np.isfinite(x):
            raise SceneFormatError(f"{where}[{i}]: non-finite number")
        vals.append(float(x))
    return vals


def _string(obj: Any, where: str) -> str:
    if not isinstance(obj, str):
        raise SceneFormatError(f"{where}: expected a string")
    return obj


def scene_from_json(data: Any, base_dir: str | Path | None = None) -> SceneDescription:
    """Build a SceneDescription from parsed JSON, strictly checking the schema.

    Raises SceneFormatError on schema problems; the result is not yet
    validated against model invariants (callers run validate_scene).
    """
    if not isinstance(data, dict):
        raise SceneFormatError("$: expected a JSON object")
    _reject_unknown(data, _TOP_KEYS, "$")

    scene_prompt = _string(data.get("scene_prompt", ""), "$.scene_prompt")

    bounds_obj = data.get("bounds", {"min": [-1, -1, -1], "max": [1, 1, 1]})
    if not isinstance(bounds_obj, dict):
        raise SceneFormatError("$.bounds: expected an object")
    _reject_unknown(bounds_obj, {"min", "max"}, "$.bounds")
    bounds = AABB(np.array(_num_list(bounds_obj.get("min", [-1, -1, -1]), 3, "$.bounds.min")),
                  np.array(_num_list(bounds_obj.get("max", [1, 1, 1]), 3, "$.bounds.max")))

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise SceneFormatError("$.seed: expected an integer")

    fields_obj = data.get("fields", {})
    if not isinstance(fields_obj, dict):
        raise SceneFormatError("$.fields: expected an object")
    fields: dict[str, FieldSpec] = {}
    for fid, entry in fields_obj.items():
        where = f"$.fields.{fid}"
        if not isinstance(entry, dict):
            raise SceneFormatError(f"{where}: expected an object")
        _reject_unknown(entry, _FIELD_KEYS, where)
        ckpt = entry.get("checkpoint")
        if ckpt is not None and not isinstance(ckpt, str):
            raise SceneFormatError(f"{where}.checkpoint: expected a path or null")
        channels = entry.get("channels", 3)
        if isinstance(channels, bool) or not isinstance(channels, int):
            raise SceneFormatError(f"{where}.channels: expected an integer")
        fields[fid] = FieldSpec(checkpoint=ckpt, channels=channels)

    proxies_obj = data.get("proxies", [])
    if not isinstance(proxies_obj, list):
        raise SceneFormatError("$.proxies: expected an array")
    proxies = []
    for i, entry in enumerate(proxies_obj):
        where = f"$.proxies[{i}]"
        if not isinstance(entry, dict):
            raise SceneFormatError(f"{where}: expected an object")
        _reject_unknown(entry, _PROXY_KEYS, where)
        if "id" not in entry or "field" not in entry:
            raise SceneFormatError(f"{where}: 'id' and 'field' are required")
        placement = RigidPlacement(
            location=_num_list(entry.get("location", [0, 0, 0]), 3, f"{where}.location"),
            rotation_quat=_num_list(entry.get("rotation_quat", [1, 0, 0, 0]), 4,
                                    f"{where}.rotation_quat"),
            scale=_num_list(entry.get("scale", [1, 1, 1]), 3, f"{where}.scale"),
        )
        shape_obj = entry.get("shape")
        shape = None
        if shape_obj is not None:
            try:
                shape = shape_from_json(shape_obj, base_dir=base_dir, where=f"{where}.shape")
            except SceneFormatError:
                raise
            except (ValueError, OSError) as e:
                raise SceneFormatError(str(e)) from e
        sw = entry.get("shape_weight", 1.0)
        if isinstance(sw, bool) or not isinstance(sw, (int, float)) or not np.isfinite(sw):
            raise SceneFormatError(f"{where}.shape_weight: expected a finite number")
        proxies.append(ObjectProxy(
            proxy_id=_string(entry["id"], f"{where}.id"),
            field_id=_string(entry["field"], f"{where}.field"),
            placement=placement,
            object_prompt=_string(entry.get("prompt", ""), f"{where}.prompt"),
            shape=shape,
            shape_weight=float(sw),
        ))

    return SceneDescription(proxies=tuple(proxies), scene_prompt=scene_prompt,
                            bounds=bounds, fields=fields, seed=seed)


def scene_to_json(scene: SceneDescription) -> dict:
    """Canonical JSON form (all keys present, quaternions as stored)."""
    return {
        "scene_prompt": scene.scene_prompt,
        "bounds": {"min": [float(x) for x in scene.bounds.min],
                   "max": [float(x) for x in scene.bounds.max]},
        "seed": int(scene.seed),
        "fields": {fid: {"checkpoint": spec.checkpoint, "channels": int(spec.channels)}
                   for fid, spec in scene.fields.items()},
        "proxies": [{
            "id": p.proxy_id,
            "field": p.field_id,
            "location": [float(x) for x in p.placement.location],
            "rotation_quat": [float(x) for x in p.placement.rotation_quat],
            "scale": [float(x) for x in p.placement.scale],
            "prompt": p.object_prompt,
            "shape": None if p.shape is None else shape_to_json(p.shape),
            "shape_weight": float(p.shape_weight),
        } for p in scene.proxies],
    }


def _reject_constant(name: str):
    raise SceneFormatError(f"non-finite JSON constant {name!r} is not allowed")


def finalize_scene(scene: SceneDescription) -> SceneDescription:
    """Validate and quaternion-normalize a parsed scene."""
    violations = validate_scene(scene)
    if violations:
        raise SceneValidationError(violations)
    proxies = tuple(replace(p, placement=p.placement.normalized()) for p in scene.proxies)
    return replace(scene, proxies=proxies)


def loads_scene(text: str, base_dir: str | Path | None = None) -> SceneDescription:
    """Parse, schema-check, validate, and quaternion-normalize a scene."""
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"line {e.lineno} column {e.colno}: {e.msg}") from e
    return finalize_scene(scene_from_json(data, base_dir=base_dir))


def load_scene(path: str | Path) -> SceneDescription:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SceneFormatError(f"cannot read {path}: {e}") from e
    try:
        return loads_scene(text, base_dir=path.parent)
    except SceneFormatError as e:
        raise SceneFormatError(f"{path}: {e}") from e


def save_scene(scene: SceneDescription, path: str | Path) -> None:
    text = json.dumps(scene_to_json(scene), indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")
