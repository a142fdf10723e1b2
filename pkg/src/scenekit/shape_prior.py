"""Shape-prior supervision: pulls a field's opacity toward the occupancy of
its proxy shape, with a leniency band around the surface.

Per sampled point p (uniform in the canonical object bounds):

    alpha(p) = 1 - exp(-sigma(p) * delta_ref)       pointwise field opacity
    w(d)     = 1 - exp(-d^2 / (2 sigma_s))          d = signed distance to shape
    loss(p)  = BCE(alpha(p), occupancy(p)) * w(d)

The band weight w vanishes on the surface, so the loss never penalizes the
boundary region where occupancy flips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import (FieldLike, FieldParams, ParamGradient, _forward,
                    eval_field_backward_batch, field_eval_batch)
from .geometry import AABB
from .scene import CANONICAL_OBJECT_BOUNDS
from .shapes import ProxyShape, occupancy, signed_distance

ALPHA_EPS = 1e-6


@dataclass(frozen=True)
class ShapeLossConfig:
    sigma_s: float = 0.01  # leniency bandwidth, canonical units^2
    n_points: int = 4096  # samples per step
    delta_ref: float = 0.05  # reference step length for pointwise opacity
    weight: float = 1.0

    def __post_init__(self):
        if not self.sigma_s > 0:
            raise ValueError("sigma_s must be positive")
        if not self.delta_ref > 0:
            raise ValueError("delta_ref must be positive")
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")


def alpha_nerf(field: FieldLike, p: np.ndarray, delta_ref: float) -> np.ndarray | float:
    """Pointwise opacity 1 - exp(-sigma * delta_ref), in [0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    sigma, _ = field_eval_batch(field, p.reshape(-1, 3))
    a = 1.0 - np.exp(-sigma.astype(np.float64) * delta_ref)
    return float(a[0]) if single else a


def shape_loss_at_points(field: FieldLike, shape: ProxyShape,
                         config: ShapeLossConfig,
                         pts: np.ndarray) -> tuple[float, ParamGradient | None]:
    """Loss and analytic parameter gradient at fixed sample points.

    Returns (loss, None) for analytic fields, which have no parameters.
    """
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    n = len(pts)

    d = np.asarray(signed_distance(shape, pts), dtype=np.float64)
    y = np.asarray(occupancy(shape, pts), dtype=np.float64)
    w = 1.0 - np.exp(-d * d / (2.0 * config.sigma_s))

    cache = None
    if isinstance(field, FieldParams):
        sigma, _, cache = _forward(field, pts)
    else:
        sigma, _ = field_eval_batch(field, pts)
    sigma = sigma.astype(np.float64)

    alpha = 1.0 - np.exp(-sigma * config.delta_ref)
    a_cl = np.clip(alpha, ALPHA_EPS, 1.0 - ALPHA_EPS)
    bce = -(y * np.log(a_cl) + (1.0 - y) * np.log(1.0 - a_cl))
    loss = config.weight * float(np.mean(bce * w))

    if not isinstance(field, FieldParams):
        return loss, None

    # d loss / d alpha, zero where the clamp is active
    dl_da = -(y / a_cl - (1.0 - y) / (1.0 - a_cl)) * w
    active = (alpha > ALPHA_EPS) & (alpha < 1.0 - ALPHA_EPS)
    da_dsigma = config.delta_ref * np.exp(-sigma * config.delta_ref)
    d_sigma = config.weight / n * dl_da * active * da_dsigma

    zeros_albedo = np.zeros((n, field.channels), dtype=field.dtype)
    grad = eval_field_backward_batch(field, pts, d_sigma.astype(field.dtype),
                                     zeros_albedo, cache=cache)
    return loss, grad


def sample_shape_points(config: ShapeLossConfig, rng: np.random.Generator,
                        bounds: AABB = CANONICAL_OBJECT_BOUNDS) -> np.ndarray:
    return rng.uniform(bounds.min, bounds.max, size=(config.n_points, 3))


def shape_loss(field: FieldLike, shape: ProxyShape, config: ShapeLossConfig,
               rng: np.random.Generator,
               bounds: AABB = CANONICAL_OBJECT_BOUNDS) -> tuple[float, ParamGradient | None]:
    """Draws config.n_points uniform points in the object bounds and
    evaluates the banded occupancy loss there."""
    pts = sample_shape_points(config, rng, bounds)
    return shape_loss_at_points(field, shape, config, pts)


def occupancy_iou(field: FieldLike, shape: ProxyShape, delta_ref: float = 0.05,
                  resolution: int = 32, threshold: float = 0.5,
                  bounds: AABB = CANONICAL_OBJECT_BOUNDS) -> float:
    """Voxel-grid IoU between thresholded field opacity and shape occupancy,
    sampled at cell centers."""
    lo, hi = bounds.min, bounds.max
    axes = [lo[k] + (np.arange(resolution) + 0.5) * (hi[k] - lo[k]) / resolution
            for k in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    a = alpha_nerf(field, pts, delta_ref) >= threshold
    occ = np.asarray(occupancy(shape, pts), dtype=bool)
    union = np.count_nonzero(a | occ)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & occ) / union
