/**
 * Small vector/quaternion/camera kit for the wireframe viewport.
 *
 * Everything works on plain arrays so state stays JSON-serializable.
 * Quaternions are (w, x, y, z), matching the scene wire format.
 */

import type { Quat, Vec3 } from "./types";

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function norm(a: Vec3): number {
  return Math.sqrt(dot(a, a));
}

export function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  if (n === 0) throw new Error("cannot normalize a zero vector");
  return scale(a, 1 / n);
}

/** Hamilton product a*b; composing rotations (apply b, then a). */
export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) throw new Error("cannot normalize a zero quaternion");
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

/** Unit quaternion for a rotation of `angle` radians about `axis`. */
export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const u = normalize(axis);
  const s = Math.sin(angle / 2);
  return [Math.cos(angle / 2), u[0] * s, u[1] * s, u[2] * s];
}

/** Rotate a point by a unit quaternion. */
export function quatRotate(q: Quat, p: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const u: Vec3 = [x, y, z];
  const uv = cross(u, p);
  const uuv = cross(u, uv);
  return add(p, scale(add(scale(uv, w), uuv), 2));
}

export interface Placement {
  location: Vec3;
  rotation_quat: Quat;
  scale: Vec3;
}

export const IDENTITY_PLACEMENT: Placement = {
  location: [0, 0, 0],
  rotation_quat: [1, 0, 0, 0],
  scale: [1, 1, 1],
};

/** Object-frame point to scene frame: rotate(scale * p) + location. */
export function objectToScene(placement: Placement, p: Vec3): Vec3 {
  const scaled: Vec3 = [
    p[0] * placement.scale[0],
    p[1] * placement.scale[1],
    p[2] * placement.scale[2],
  ];
  return add(quatRotate(placement.rotation_quat, scaled), placement.location);
}

/**
 * Orbit camera state: spherical angles around a target point. azimuth 0
 * looks down -z toward the target; elevation is latitude in radians.
 */
export interface OrbitCamera {
  target: Vec3;
  radius: number;
  azimuth: number;
  elevation: number;
  fov: number; // vertical, radians
}

export function orbitEye(cam: OrbitCamera): Vec3 {
  const ce = Math.cos(cam.elevation);
  return add(cam.target, [
    cam.radius * ce * Math.sin(cam.azimuth),
    cam.radius * Math.sin(cam.elevation),
    cam.radius * ce * Math.cos(cam.azimuth),
  ]);
}

/** Recover orbit state from an eye/target pair (fov carried through). */
export function orbitFromLookAt(eye: Vec3, target: Vec3, fov: number): OrbitCamera {
  const rel = sub(eye, target);
  const radius = norm(rel);
  if (radius === 0) throw new Error("eye and target coincide");
  return {
    target,
    radius,
    azimuth: Math.atan2(rel[0], rel[2]),
    elevation: Math.asin(Math.max(-1, Math.min(1, rel[1] / radius))),
    fov,
  };
}

export interface CameraBasis {
  eye: Vec3;
  right: Vec3;
  up: Vec3;
  forward: Vec3; // unit, eye toward target
}

export function cameraBasis(cam: OrbitCamera): CameraBasis {
  const eye = orbitEye(cam);
  const forward = normalize(sub(cam.target, eye));
  const worldUp: Vec3 = [0, 1, 0];
  // near the poles the view direction degenerates against world up
  const side = cross(forward, worldUp);
  const right = norm(side) < 1e-9 ? ([1, 0, 0] as Vec3) : normalize(side);
  const up = cross(right, forward);
  return { eye, right, up, forward };
}

export interface ProjectedPoint {
  x: number;
  y: number;
  depth: number; // camera-space distance along forward; <= 0 is behind
}

/** Perspective-project a scene point to pixel coordinates on a canvas. */
export function project(
  cam: OrbitCamera,
  basis: CameraBasis,
  p: Vec3,
  width: number,
  height: number,
): ProjectedPoint {
  const rel = sub(p, basis.eye);
  const depth = dot(rel, basis.forward);
  const tanHalf = Math.tan(cam.fov / 2);
  const yc = dot(rel, basis.up) / (Math.abs(depth) * tanHalf);
  const xc = dot(rel, basis.right) / (Math.abs(depth) * tanHalf * (width / height));
  return {
    x: (xc * 0.5 + 0.5) * width,
    y: (0.5 - yc * 0.5) * height,
    depth,
  };
}
