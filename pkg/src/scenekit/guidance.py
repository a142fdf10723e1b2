"""Guidance oracles: image-space gradient providers for training.

Two implementations share one interface: a built-in photometric oracle
(gradient of 0.5 * ||image - target||^2, for fully local verification) and
a wire-protocol client that fetches score-distillation gradients from an
external server. The engine never runs diffusion math itself; the remote
contract is gradient in, gradient out.

Wire protocol: HTTP POST {endpoint}/gradient with JSON body
{width, height, channels, image: base64 little-endian float32 row-major,
prompt, step, params}; 200 response {gradient: base64 same shape, scale}.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import requests

from .images import read_pfm


class GuidanceError(Exception):
    """Base class; training steps catch this and skip."""


class GuidanceConfigError(GuidanceError):
    pass


class GuidanceTimeout(GuidanceError):
    pass


class GuidanceProtocolError(GuidanceError):
    """Malformed server response (bad JSON, bad base64, missing keys)."""


class GuidanceShapeError(GuidanceError):
    """Server returned a gradient whose size does not match the request."""


class GuidanceHTTPError(GuidanceError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"guidance server returned {status}: {body[:200]}")


@dataclass(frozen=True)
class GuidanceGradient:
    gradient: np.ndarray  # (H, W, C) float32
    scale: float = 1.0


@dataclass(frozen=True)
class GuidanceRequest:
    image: np.ndarray  # (H, W, C) float raster
    prompt: str = ""
    step: int = 0
    guidance_params: Mapping[str, Any] = dataclass_field(default_factory=dict)


def photometric_guidance(image: np.ndarray, target_image: np.ndarray) -> GuidanceGradient:
    """Gradient of 0.5 * ||image - target||^2: simply (image - target)."""
    image = np.asarray(image, dtype=np.float32)
    target = np.asarray(target_image, dtype=np.float32)
    if image.shape != target.shape:
        raise GuidanceShapeError(
            f"image shape {image.shape} != target shape {target.shape}")
    return GuidanceGradient(gradient=image - target, scale=1.0)


# ---------------------------------------------------------------------------
# remote client


def _encode_raster(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _decode_raster(b64: str, shape: tuple[int, int, int]) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception as e:
        raise GuidanceProtocolError(f"gradient payload is not valid base64: {e}") from e
    count = int(np.prod(shape))
    if len(raw) != 4 * count:
        raise GuidanceShapeError(
            f"gradient payload holds {len(raw) // 4} floats, expected {count}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def remote_sds_gradient(endpoint: str, request: GuidanceRequest,
                        timeout: float = 30.0) -> GuidanceGradient:
    """Fetch a per-pixel gradient from a guidance server; the returned raster
    is used verbatim. The request image buffer is never mutated."""
    image = np.asarray(request.image, dtype=np.float32)
    if image.ndim != 3:
        raise GuidanceConfigError(f"image must be (H, W, C), got shape {image.shape}")
    h, w, c = image.shape
    body = {
        "width": w,
        "height": h,
        "channels": c,
        "image": _encode_raster(image),
        "prompt": request.prompt,
        "step": int(request.step),
        "params": dict(request.guidance_params),
    }
    url = endpoint.rstrip("/") + "/gradient"
    try:
        resp = requests.post(url, json=body, timeout=timeout)
    except requests.Timeout as e:
        raise GuidanceTimeout(f"guidance request timed out after {timeout}s") from e
    except requests.RequestException as e:
        raise GuidanceError(f"guidance request failed: {e}") from e
    if resp.status_code != 200:
        raise GuidanceHTTPError(resp.status_code, resp.text)
    try:
        payload = resp.json()
    except ValueError as e:
        raise GuidanceProtocolError(f"guidance response is not JSON: {e}") from e
    if not isinstance(payload, dict) or "gradient" not in payload:
        raise GuidanceProtocolError("guidance response missing 'gradient'")
    gradient = _decode_raster(payload["gradient"], (h, w, c))
    scale = payload.get("scale", 1.0)
    if not isinstance(scale, (int, float)) or not np.isfinite(scale):
        raise GuidanceProtocolError(f"bad gradient scale {scale!r}")
    return GuidanceGradient(gradient=gradient, scale=float(scale))


# ---------------------------------------------------------------------------
# handles (what the trainer calls)


class PhotometricGuidance:
    """Targets keyed by scope: one composed-scene target and optional
    per-object targets keyed by field id. Stateless between calls."""

    def __init__(self, scene_target: np.ndarray | None = None,
                 object_targets: Mapping[str, np.ndarray] | None = None):
        self.scene_target = None if scene_target is None else np.asarray(
            scene_target, dtype=np.float32)
        self.object_targets = {k: np.asarray(v, dtype=np.float32)
                               for k, v in (object_targets or {}).items()}

    def _target_for(self, scope: str, object_id: str | None) -> np.ndarray:
        if scope == "object" and object_id in self.object_targets:
            return self.object_targets[object_id]
        if self.scene_target is not None:
            return self.scene_target
        raise GuidanceConfigError(
            f"no photometric target configured for scope={scope!r} object={object_id!r}")

    def gradient(self, image: np.ndarray, prompt: str, step: int,
                 scope: str = "scene", object_id: str | None = None) -> GuidanceGradient:
        return photometric_guidance(image, self._target_for(scope, object_id))


class RemoteGuidance:
    """Wire-protocol client handle; retries once on timeout, then raises."""

    def __init__(self, endpoint: str, params: Mapping[str, Any] | None = None,
                 timeout: float = 30.0, retries: int = 1):
        if not endpoint:
            raise GuidanceConfigError("remote guidance needs an endpoint")
        self.endpoint = endpoint
        self.params = dict(params or {})
        self.timeout = timeout
        self.retries = retries

    def gradient(self, image: np.ndarray, prompt: str, step: int,
                 scope: str = "scene", object_id: str | None = None) -> GuidanceGradient:
        request = GuidanceRequest(image=image, prompt=prompt, step=step,
                                  guidance_params=self.params)
        attempts = self.retries + 1
        for attempt in range(attempts):
            try:
                return remote_sds_gradient(self.endpoint, request, timeout=self.timeout)
            except GuidanceTimeout:
                if attempt == attempts - 1:
                    raise
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class GuidanceConfig:
    """mode 'photometric' needs target (PFM path, or a directory holding
    scene.pfm plus <field_id>.pfm per object); mode 'remote' needs endpoint."""

    mode: str = "photometric"
    target: str | None = None
    endpoint: str | None = None
    params: Mapping[str, Any] = dataclass_field(default_factory=dict)
    timeout: float = 30.0

    @classmethod
    def from_string(cls, text: str) -> "GuidanceConfig":
        """CLI shorthand: 'photometric:PATH' or 'remote:URL'."""
        mode, sep, rest = text.partition(":")
        if mode == "photometric":
            return cls(mode="photometric", target=rest if sep else None)
        if mode == "remote":
            return cls(mode="remote", endpoint=rest if sep else None)
        raise GuidanceConfigError(f"unknown guidance mode {mode!r}")


def _load_target(path: Path) -> np.ndarray:
    arr = read_pfm(path)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def select_guidance(config: GuidanceConfig):
    """Builds the guidance handle for a config; raises GuidanceConfigError
    when the config is incomplete."""
    if config.mode == "photometric":
        if config.target is None:
            raise GuidanceConfigError("photometric guidance needs a target")
        path = Path(config.target)
        if path.is_dir():
            scene_path = path / "scene.pfm"
            scene_target = _load_target(scene_path) if scene_path.exists() else None
            object_targets = {p.stem: _load_target(p) for p in sorted(path.glob("*.pfm"))
                              if p.stem != "scene" and not p.stem.endswith("_opacity")}
            if scene_target is None and not object_targets:
                raise GuidanceConfigError(f"no .pfm targets found in {path}")
            return PhotometricGuidance(scene_target, object_targets)
        return PhotometricGuidance(scene_target=_load_target(path))
    if config.mode == "remote":
        if not config.endpoint:
            raise GuidanceConfigError("remote guidance needs an endpoint")
        return RemoteGuidance(config.endpoint, params=config.params, timeout=config.timeout)
    raise GuidanceConfigError(f"unknown guidance mode {config.mode!r}")
