"""Volume rendering: pinhole rays, stratified/midpoint depth sampling,
alpha compositing, multi-proxy composed rendering, and reverse-mode
gradients of pixel colors with respect to field parameters.

Composed rendering draws depth samples once per ray in scene space,
assigns sample i to proxy k = i mod N (round-robin over the scene's proxy
order), transforms each sample into its proxy's canonical frame, evaluates
that proxy's field there, and composites all samples strictly in depth
order. Each sample's depth step is the gap to the next sample of the same
proxy, so every proxy's quadrature covers the whole ray and density
integrates to sigma * length in regions only that proxy occupies. Because
density is defined per canonical unit length, the step of a sample
assigned to proxy k is additionally multiplied by the length-scale factor
||diag(1/scale) R^T d|| of that proxy before the opacity conversion.

Geometry and compositing run in float64; field evaluation runs in the
field's own dtype; finished images are float32. Rays that miss the scene
bounds contribute zero color and zero opacity. Midpoint sampling (the
default) makes renders fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import (AnalyticField, FieldParams, FieldRegistry, ParamGradient,
                    _forward, eval_field_backward_batch, field_eval_batch)
from .geometry import AABB, look_at_rotation, quat_from_matrix, ray_aabb_intersect
from .images import Image
from .scene import (CANONICAL_OBJECT_BOUNDS, FieldSpec, ObjectProxy,
                    RigidPlacement, SceneDescription, scene_to_object)

# max field evaluations per ray chunk; bounds peak memory, never changes results
CHUNK_POINT_BUDGET = 1 << 18


@dataclass(frozen=True)
class Camera:
    """Pinhole camera. pose is camera-to-scene (local -z is the view
    direction, +y up); pose scale is ignored for ray generation."""

    pose: RigidPlacement
    fov_y: float = math.pi / 3
    resolution: tuple[int, int] = (64, 64)  # (width, height)

    def __post_init__(self):
        if not 0.0 < self.fov_y < math.pi:
            raise ValueError("vertical FOV must be in (0, pi)")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise ValueError("resolution must be at least 1x1")


def camera_look_at(eye, target, fov_y: float = math.pi / 3,
                   resolution: tuple[int, int] = (64, 64), up=(0.0, 1.0, 0.0)) -> Camera:
    rot = look_at_rotation(eye, target, up)
    pose = RigidPlacement(location=eye, rotation_quat=quat_from_matrix(rot))
    return Camera(pose=pose, fov_y=fov_y, resolution=resolution)


def camera_from_json(data, resolution: tuple[int, int] = (64, 64)) -> Camera:
    """Parse {'eye': [x,y,z], 'look_at': [x,y,z]} with optional 'fov'
    (radians), 'up', and 'resolution' [w, h]. Strict about keys."""
    if not isinstance(data, dict):
        raise ValueError("camera must be an object")
    unknown = set(data) - {"eye", "look_at", "fov", "up", "resolution"}
    if unknown:
        raise ValueError(f"unknown camera key {sorted(unknown)[0]!r}")
    missing = {"eye", "look_at"} - set(data)
    if missing:
        raise ValueError(f"camera needs {sorted(missing)[0]!r}")

    def vec3(key):
        v = data[key]
        if not (isinstance(v, (list, tuple)) and len(v) == 3
                and all(isinstance(x, (int, float)) and math.isfinite(x) for x in v)):
            raise ValueError(f"camera {key} must be three finite numbers")
        return [float(x) for x in v]

    if "resolution" in data:
        r = data["resolution"]
        if not (isinstance(r, (list, tuple)) and len(r) == 2
                and all(isinstance(x, int) for x in r)):
            raise ValueError("camera resolution must be [width, height] integers")
        resolution = (r[0], r[1])
    fov = data.get("fov", math.pi / 3)
    if not (isinstance(fov, (int, float)) and math.isfinite(fov)):
        raise ValueError("camera fov must be a finite number in radians")
    up = vec3("up") if "up" in data else (0.0, 1.0, 0.0)
    eye, target = vec3("eye"), vec3("look_at")
    if eye == target:
        raise ValueError("camera eye and look_at must differ")
    return camera_look_at(eye, target, fov_y=float(fov), resolution=resolution, up=up)


@dataclass(eq=False)
class RayBundle:
    """One ray per pixel, row-major. Rays that miss the bounds have
    hit=False and t_near == t_far == 0."""

    origins: np.ndarray  # (P, 3)
    dirs: np.ndarray  # (P, 3), unit norm
    t_near: np.ndarray  # (P,)
    t_far: np.ndarray  # (P,)
    hit: np.ndarray  # (P,) bool
    width: int
    height: int


def generate_rays(camera: Camera, bounds: AABB) -> RayBundle:
    w, h = camera.resolution
    tan_half = math.tan(camera.fov_y / 2.0)
    aspect = w / h
    xs = (np.arange(w) + 0.5) / w * 2.0 - 1.0
    ys = (np.arange(h) + 0.5) / h * 2.0 - 1.0
    gx, gy = np.meshgrid(xs, ys)  # row-major: gy varies down the image
    dirs_cam = np.stack([gx * tan_half * aspect, -gy * tan_half,
                         -np.ones_like(gx)], axis=-1).reshape(-1, 3)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=1, keepdims=True)
    rot = camera.pose.rotation_matrix()
    dirs = dirs_cam @ rot.T
    origins = np.broadcast_to(camera.pose.location, dirs.shape).copy()
    t_near, t_far, hit = ray_aabb_intersect(origins, dirs, bounds)
    t_near = np.where(hit, t_near, 0.0)
    t_far = np.where(hit, t_far, 0.0)
    return RayBundle(origins=origins, dirs=dirs, t_near=t_near, t_far=t_far,
                     hit=hit, width=w, height=h)


# ---------------------------------------------------------------------------
# depth sampling


def sample_ray(t_near: float, t_far: float, n: int, stratified: bool = False,
               rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Depth samples for one ray: midpoints of n equal sub-intervals, or one
    uniform draw per sub-interval when stratified. Returns (t, delta) with
    delta_i = t_{i+1} - t_i and the last delta = t_far - t_{n-1}."""
    if n < 1:
        raise ValueError("need at least one sample")
    if not t_near < t_far:
        raise ValueError("t_near must be < t_far")
    if stratified:
        if rng is None:
            raise ValueError("stratified sampling needs an rng")
        offs = rng.uniform(size=(1, n))
    else:
        offs = np.full((1, n), 0.5)
    t, delta = _sample_t_batch(np.array([t_near]), np.array([t_far]), offs)
    return t[0], delta[0]


def _sample_t_batch(t_near: np.ndarray, t_far: np.ndarray,
                    offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """t[p, i] = t_near[p] + (i + offsets[p, i]) * h[p]; degenerate rays
    (t_near == t_far) produce constant rows with zero deltas."""
    n = offsets.shape[1]
    h = (t_far - t_near) / n
    t = t_near[:, None] + (np.arange(n)[None, :] + offsets) * h[:, None]
    delta = np.empty_like(t)
    delta[:, :-1] = t[:, 1:] - t[:, :-1]
    delta[:, -1] = t_far - t[:, -1]
    return t, delta


def partition_assignment(n_samples: int, n_obj: int) -> np.ndarray:
    """Round-robin proxy index per sample: k_i = i mod n_obj."""
    return np.arange(n_samples) % n_obj


# ---------------------------------------------------------------------------
# compositing


def alpha_from_sigma(sigma, delta):
    """Opacity of one step: 1 - exp(-sigma * delta)."""
    return 1.0 - np.exp(-np.asarray(sigma, dtype=np.float64) * np.asarray(delta, dtype=np.float64))


def _composite_batch(alpha: np.ndarray, colors: np.ndarray):
    """alpha (P, n), colors (P, n, C) -> (color (P, C), T_final (P,),
    weights T_i alpha_i (P, n), T (P, n))."""
    one_minus = 1.0 - alpha
    prod = np.cumprod(one_minus, axis=1)
    t_before = np.concatenate([np.ones((alpha.shape[0], 1)), prod[:, :-1]], axis=1)
    weights = t_before * alpha
    color = np.einsum("pn,pnc->pc", weights, colors)
    t_final = prod[:, -1]
    return color, t_final, weights, t_before


def composite(alphas, colors) -> tuple[np.ndarray, float]:
    """Single-ray compositing: C = sum_i T_i alpha_i c_i with
    T_i = prod_{j<i} (1 - alpha_j). Returns (color, final transmittance)."""
    alpha = np.asarray(alphas, dtype=np.float64).reshape(1, -1)
    cols = np.asarray(colors, dtype=np.float64)
    if cols.ndim == 1:
        cols = cols[:, None]
    cols = cols.reshape(1, alpha.shape[1], -1)
    color, t_final, _, _ = _composite_batch(alpha, cols)
    return color[0], float(t_final[0])


def _composite_backward(g_color: np.ndarray, alpha: np.ndarray, colors: np.ndarray,
                        weights: np.ndarray, t_before: np.ndarray):
    """Gradients of sum_p <g_color[p], C[p]> wrt alpha and colors.

    dC/dc_i = T_i alpha_i; dC/dalpha_i = T_i (c_i - B_i) with the
    division-free suffix B_i = alpha_{i+1} c_{i+1} + (1 - alpha_{i+1}) B_{i+1}
    (well-defined even when some alpha reaches exactly 1).
    """
    n = alpha.shape[1]
    d_colors = weights[:, :, None] * g_color[:, None, :]
    suffix = np.zeros_like(colors)
    for i in range(n - 2, -1, -1):
        a_next = alpha[:, i + 1][:, None]
        suffix[:, i] = a_next * colors[:, i + 1] + (1.0 - a_next) * suffix[:, i + 1]
    d_alpha = t_before * np.einsum("pc,pnc->pn", g_color, colors - suffix)
    return d_alpha, d_colors


# ---------------------------------------------------------------------------
# composed rendering


class RenderError(ValueError):
    pass


def _check_scene(scene: SceneDescription, registry: FieldRegistry) -> int:
    if len(scene.proxies) == 0:
        raise RenderError("composed rendering needs at least one proxy")
    channels = None
    for proxy in scene.proxies:
        if proxy.field_id not in registry:
            raise RenderError(f"unresolvable field id {proxy.field_id!r}")
        c = registry[proxy.field_id].channels
        if channels is None:
            channels = c
        elif c != channels:
            raise RenderError("all bound fields must share one channel count")
    return channels


@dataclass(eq=False)
class _ProxyTrace:
    """Per-proxy forward cache for one ray chunk."""

    field_id: str
    pts: np.ndarray  # (P * n_k, 3) canonical-frame sample points
    cache: object  # MLP activation cache or None for analytic fields
    sigma: np.ndarray  # (P, n_k) float64
    dscaled: np.ndarray  # (P, n_k) scale-corrected deltas
    trans: np.ndarray  # (P, n_k) exp(-sigma * dscaled)


def _forward_chunk(scene: SceneDescription, registry: FieldRegistry,
                   origins: np.ndarray, dirs: np.ndarray, t: np.ndarray,
                   t_far: np.ndarray, channels: int, keep_trace: bool):
    n_obj = len(scene.proxies)
    p_rays, n = t.shape
    alpha = np.zeros((p_rays, n))
    colors = np.zeros((p_rays, n, channels))
    traces: list[_ProxyTrace | None] = []
    for k, proxy in enumerate(scene.proxies):
        tk = t[:, k::n_obj]
        if tk.shape[1] == 0:
            traces.append(None)
            continue
        # step length from the proxy's own sample subsequence: each proxy
        # quadratures the full ray with its samples, so sigma integrates to
        # sigma * length in regions only it occupies
        dk = np.empty_like(tk)
        dk[:, :-1] = tk[:, 1:] - tk[:, :-1]
        dk[:, -1] = t_far - tk[:, -1]
        x = origins[:, None, :] + tk[:, :, None] * dirs[:, None, :]
        xt = scene_to_object(proxy.placement, x.reshape(-1, 3))
        rot = proxy.placement.rotation_matrix()
        d_local = (dirs @ rot) / proxy.placement.scale
        s = np.linalg.norm(d_local, axis=1)

        field = registry[proxy.field_id]
        cache = None
        if isinstance(field, FieldParams):
            sigma_f, albedo_f, cache = _forward(field, xt)
        else:
            sigma_f, albedo_f = field_eval_batch(field, xt)
        sigma = sigma_f.astype(np.float64).reshape(p_rays, -1)
        albedo = albedo_f.astype(np.float64).reshape(p_rays, -1, channels)

        dscaled = dk * s[:, None]
        trans = np.exp(-sigma * dscaled)
        alpha[:, k::n_obj] = 1.0 - trans
        colors[:, k::n_obj] = albedo
        if keep_trace:
            traces.append(_ProxyTrace(proxy.field_id, xt, cache, sigma, dscaled, trans))
        else:
            traces.append(None)
    color, t_final, weights, t_before = _composite_batch(alpha, colors)
    return color, t_final, (alpha, colors, weights, t_before, traces)


def _prepare(scene, registry, camera, n_samples, stratified, rng):
    channels = _check_scene(scene, registry)
    rays = generate_rays(camera, scene.bounds)
    p_rays = len(rays.origins)
    if stratified:
        if rng is None:
            raise RenderError("stratified sampling needs an rng")
        offsets = rng.uniform(size=(p_rays, n_samples))
    else:
        offsets = np.full((p_rays, n_samples), 0.5)
    t, _ = _sample_t_batch(rays.t_near, rays.t_far, offsets)
    return channels, rays, t


def render_composed_f64(scene: SceneDescription, registry: FieldRegistry, camera: Camera,
                        n_samples: int, rng: np.random.Generator | None = None,
                        stratified: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Full-precision render: (color (H, W, C), opacity (H, W)) float64.

    This is the raster render_composed quantizes to float32; gradient
    checks difference this path.
    """
    channels, rays, t = _prepare(scene, registry, camera, n_samples, stratified, rng)
    p_rays = len(rays.origins)
    color = np.zeros((p_rays, channels))
    opacity = np.zeros(p_rays)
    chunk = max(1, CHUNK_POINT_BUDGET // max(n_samples, 1))
    for lo in range(0, p_rays, chunk):
        hi = min(lo + chunk, p_rays)
        c, t_final, _ = _forward_chunk(scene, registry, rays.origins[lo:hi],
                                       rays.dirs[lo:hi], t[lo:hi], rays.t_far[lo:hi],
                                       channels, keep_trace=False)
        color[lo:hi] = c
        opacity[lo:hi] = 1.0 - t_final
    h, w = rays.height, rays.width
    return color.reshape(h, w, channels), opacity.reshape(h, w)


def render_composed(scene: SceneDescription, registry: FieldRegistry, camera: Camera,
                    n_samples: int, rng: np.random.Generator | None = None,
                    stratified: bool = False) -> Image:
    """Multi-proxy render per the module docstring. Deterministic when
    stratified is off."""
    color, opacity = render_composed_f64(scene, registry, camera, n_samples,
                                         rng=rng, stratified=stratified)
    return Image(color.astype(np.float32), opacity.astype(np.float32))


def render_single(field, camera: Camera, n_samples: int,
                  rng: np.random.Generator | None = None, stratified: bool = False,
                  bounds: AABB = CANONICAL_OBJECT_BOUNDS) -> Image:
    """Render one field in its canonical frame. Implemented as composed
    rendering of a synthetic one-proxy identity scene, so the two agree
    bit for bit on the same sampling stream."""
    scene = SceneDescription(
        proxies=(ObjectProxy(proxy_id="object", field_id="field"),),
        bounds=bounds,
        fields={"field": FieldSpec(checkpoint=None, channels=field.channels)},
    )
    registry = FieldRegistry({"field": field})
    return render_composed(scene, registry, camera, n_samples, rng=rng, stratified=stratified)


def render_backward(scene: SceneDescription, registry: FieldRegistry, camera: Camera,
                    n_samples: int, pixel_cotangent: np.ndarray,
                    rng: np.random.Generator | None = None,
                    stratified: bool = False) -> dict[str, ParamGradient]:
    """Analytic gradient of sum_pixels <cotangent, color> with respect to
    every bound trainable field's parameters.

    Gradients of a field bound to several proxies accumulate over its
    proxies' samples in proxy order. Must be called with the same sampling
    arguments (and rng state, if stratified) as the matching forward render.
    """
    channels, rays, t = _prepare(scene, registry, camera, n_samples, stratified, rng)
    cot = np.asarray(pixel_cotangent, dtype=np.float64)
    if cot.shape != (rays.height, rays.width, channels):
        raise RenderError(
            f"cotangent shape {cot.shape} != {(rays.height, rays.width, channels)}")
    if not np.all(np.isfinite(cot)):
        raise RenderError("cotangent must be finite")
    g_color_all = cot.reshape(-1, channels)

    grads: dict[str, ParamGradient] = {}
    n_obj = len(scene.proxies)
    p_rays = len(rays.origins)
    chunk = max(1, CHUNK_POINT_BUDGET // max(n_samples, 1))
    for lo in range(0, p_rays, chunk):
        hi = min(lo + chunk, p_rays)
        _, _, state = _forward_chunk(scene, registry, rays.origins[lo:hi],
                                     rays.dirs[lo:hi], t[lo:hi], rays.t_far[lo:hi],
                                     channels, keep_trace=True)
        alpha, colors, weights, t_before, traces = state
        d_alpha, d_colors = _composite_backward(g_color_all[lo:hi], alpha, colors,
                                                weights, t_before)
        for k, trace in enumerate(traces):
            if trace is None:
                continue
            field = registry[trace.field_id]
            if not isinstance(field, FieldParams):
                continue
            da = d_alpha[:, k::n_obj]
            dc = d_colors[:, k::n_obj]
            # d alpha / d sigma = dscaled * exp(-sigma * dscaled)
            d_sigma = (da * trace.dscaled * trace.trans).reshape(-1)
            grad = eval_field_backward_batch(
                field, trace.pts, d_sigma.astype(field.dtype),
                dc.reshape(-1, channels).astype(field.dtype), cache=trace.cache)
            if trace.field_id in grads:
                grads[trace.field_id].add_(grad)
            else:
                grads[trace.field_id] = grad
    for proxy in scene.proxies:
        field = registry[proxy.field_id]
        if isinstance(field, FieldParams) and proxy.field_id not in grads:
            grads[proxy.field_id] = ParamGradient.zeros_like(field)
    return grads
