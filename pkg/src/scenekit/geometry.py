"""Quaternion, rotation and axis-aligned-box helpers shared across the engine.

Quaternions use (w, x, y, z) component order throughout, matching the scene
file format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = float(np.linalg.norm(q))
    if n < 1e-8:
        raise ValueError("degenerate quaternion (norm ~ 0)")
    if n == 1.0:
        return q.copy()
    return q / n


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a quaternion (wxyz).

    Uses the homogeneous form, which is invariant under quaternion scaling and
    yields exact +-1/0 entries for the 180-degree axis rotations.
    """
    w, x, y, z = np.asarray(q, dtype=np.float64)
    n = w * w + x * x + y * y + z * z
    if n < 1e-16:
        raise ValueError("degenerate quaternion (norm ~ 0)")
    m = np.array([
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ])
    if n != 1.0:
        m /= n
    return m


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b (apply b first, then a)."""
    aw, ax, ay, az = np.asarray(a, dtype=np.float64)
    bw, bx, by, bz = np.asarray(b, dtype=np.float64)
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Quaternion (wxyz) of a rotation matrix, via Shepperd's method."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diagonal(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return quat_normalize(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def rotate_vector(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return quat_to_matrix(q) @ np.asarray(v, dtype=np.float64)


@dataclass(frozen=True)
class AABB:
    """Axis-aligned box; min/max are float64 3-vectors."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=np.float64).reshape(3))
        object.__setattr__(self, "max", np.asarray(self.max, dtype=np.float64).reshape(3))

    @classmethod
    def cube(cls, half_extent: float = 1.0) -> "AABB":
        h = float(half_extent)
        return cls(np.full(3, -h), np.full(3, h))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    def has_positive_extent(self) -> bool:
        return bool(np.all(self.max > self.min))

    def contains(self, p: np.ndarray) -> bool:
        p = np.asarray(p)
        return bool(np.all(p >= self.min) and np.all(p <= self.max))


def ray_aabb_intersect(origins: np.ndarray, dirs: np.ndarray, box: AABB):
    """Slab intersection of rays with a box.

    Args:
        origins: (N, 3) ray origins.
        dirs: (N, 3) ray directions (need not be unit length).
        box: the AABB.

    Returns:
        (t_near, t_far, hit): each (N,). t_near is clamped at 0 (origins
        inside the box start at the origin). hit is False where the ray
        misses the box entirely, in which case t_near/t_far are meaningless.
    """
    origins = np.asarray(origins, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = 1.0 / dirs
        t0 = (box.min[None, :] - origins) * inv
        t1 = (box.max[None, :] - origins) * inv
    # 0*inf -> nan when the origin sits on a slab plane with zero direction;
    # treat those axes as non-constraining.
    lo = np.minimum(t0, t1)
    hi = np.maximum(t0, t1)
    lo = np.where(np.isnan(lo), -np.inf, lo)
    hi = np.where(np.isnan(hi), np.inf, hi)
    t_near = np.max(lo, axis=1)
    t_far = np.min(hi, axis=1)
    t_near = np.maximum(t_near, 0.0)
    hit = t_far > t_near
    return t_near, t_far, hit


def look_at_rotation(eye: np.ndarray, target: np.ndarray, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Camera-to-world rotation matrix for a camera at `eye` looking at `target`.

    Camera convention: local -z is the viewing direction, +y is up, +x right.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    forward = target - eye
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise ValueError("look_at: eye coincides with target")
    forward = forward / n
    if abs(float(np.dot(forward, up))) / np.linalg.norm(up) > 1.0 - 1e-9:
        up = np.array([0.0, 0.0, 1.0]) if abs(forward[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    true_up = np.cross(right, forward)
    return np.stack([right, true_up, -forward], axis=1)
