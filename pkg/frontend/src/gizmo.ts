/**
 * Transform gizmo math: pointer drags to placement updates.
 *
 * Pure functions over the orbit camera, so drags are testable without a
 * DOM. The viewport draws the handles returned by gizmoHandles and feeds
 * pointer positions to the drag functions; the resulting placement goes to
 * the state mirror immediately and to the server on commit.
 */

import {
  add,
  CameraBasis,
  dot,
  OrbitCamera,
  Placement,
  project,
  quatFromAxisAngle,
  quatMultiply,
  quatNormalize,
  quatRotate,
  scale as vscale,
} from "./math";
import type { Vec3 } from "./types";

export type GizmoMode = "translate" | "rotate" | "scale";
export type Axis = 0 | 1 | 2;

export interface ViewContext {
  cam: OrbitCamera;
  basis: CameraBasis;
  width: number;
  height: number;
}

const OBJECT_AXES: Vec3[] = [
  [1, 0, 0],
  [0, 1, 0],
  [0, 0, 1],
];

/** World-space direction of one object axis under the placement rotation. */
export function axisDirection(placement: Placement, axis: Axis): Vec3 {
  return quatRotate(placement.rotation_quat, OBJECT_AXES[axis]!);
}

export interface GizmoHandle {
  axis: Axis;
  x: number;
  y: number;
  centerX: number;
  centerY: number;
  behind: boolean;
}

/** Screen-space handle endpoints for the three axes, for draw and pick. */
export function gizmoHandles(
  ctx: ViewContext,
  placement: Placement,
  length = 0.6,
): GizmoHandle[] {
  const center = project(ctx.cam, ctx.basis, placement.location, ctx.width, ctx.height);
  return ([0, 1, 2] as Axis[]).map((axis) => {
    const tip = add(placement.location, vscale(axisDirection(placement, axis), length));
    const p = project(ctx.cam, ctx.basis, tip, ctx.width, ctx.height);
    return {
      axis,
      x: p.x,
      y: p.y,
      centerX: center.x,
      centerY: center.y,
      behind: p.depth <= 0 || center.depth <= 0,
    };
  });
}

/** The handle within pickRadius of the pointer, or null. */
export function pickHandle(
  handles: GizmoHandle[],
  px: number,
  py: number,
  pickRadius = 12,
): GizmoHandle | null {
  let best: GizmoHandle | null = null;
  let bestDist = pickRadius;
  for (const handle of handles) {
    if (handle.behind) continue;
    const d = Math.hypot(handle.x - px, handle.y - py);
    if (d <= bestDist) {
      best = handle;
      bestDist = d;
    }
  }
  return best;
}

/**
 * Translate along one object axis: the world delta is the pointer motion
 * projected onto the axis's screen direction, in world units.
 */
export function translateDrag(
  ctx: ViewContext,
  start: Placement,
  axis: Axis,
  fromX: number,
  fromY: number,
  toX: number,
  toY: number,
): Placement {
  const dir = axisDirection(start, axis);
  const a = project(ctx.cam, ctx.basis, start.location, ctx.width, ctx.height);
  const b = project(ctx.cam, ctx.basis, add(start.location, dir), ctx.width, ctx.height);
  const sx = b.x - a.x;
  const sy = b.y - a.y;
  const len2 = sx * sx + sy * sy;
  if (len2 < 1e-12) return start; // axis points straight at the camera
  const t = ((toX - fromX) * sx + (toY - fromY) * sy) / len2;
  return { ...start, location: add(start.location, vscale(dir, t)) };
}

/**
 * Rotate about one object axis: pointer angle swept around the projected
 * center, sign-corrected when the axis points away from the camera.
 */
export function rotateDrag(
  ctx: ViewContext,
  start: Placement,
  axis: Axis,
  fromX: number,
  fromY: number,
  toX: number,
  toY: number,
): Placement {
  const center = project(ctx.cam, ctx.basis, start.location, ctx.width, ctx.height);
  const a0 = Math.atan2(fromY - center.y, fromX - center.x);
  const a1 = Math.atan2(toY - center.y, toX - center.x);
  let sweep = a1 - a0;
  if (sweep > Math.PI) sweep -= 2 * Math.PI;
  if (sweep < -Math.PI) sweep += 2 * Math.PI;
  const dir = axisDirection(start, axis);
  // screen y grows downward, and an axis toward the camera flips the sense
  const sign = dot(dir, ctx.basis.forward) > 0 ? 1 : -1;
  const q = quatFromAxisAngle(dir, sign * sweep);
  return {
    ...start,
    rotation_quat: quatNormalize(quatMultiply(q, start.rotation_quat)),
  };
}

/**
 * Scale one axis (or all three with axis null) by the ratio of pointer
 * distances from the projected center. Scale stays strictly positive.
 */
export function scaleDrag(
  ctx: ViewContext,
  start: Placement,
  axis: Axis | null,
  fromX: number,
  fromY: number,
  toX: number,
  toY: number,
  minScale = 1e-3,
): Placement {
  const center = project(ctx.cam, ctx.basis, start.location, ctx.width, ctx.height);
  const d0 = Math.hypot(fromX - center.x, fromY - center.y);
  const d1 = Math.hypot(toX - center.x, toY - center.y);
  if (d0 < 1e-9) return start;
  const factor = Math.max(d1 / d0, 1e-6);
  const next: Vec3 = [...start.scale];
  if (axis === null) {
    for (let i = 0; i < 3; i++) next[i] = Math.max(next[i]! * factor, minScale);
  } else {
    next[axis] = Math.max(next[axis]! * factor, minScale);
  }
  return { ...start, scale: next };
}

export const AXIS_NAMES = ["x", "y", "z"] as const;

export function axisColor(axis: Axis): string {
  return ["#e05555", "#55c055", "#5577e0"][axis]!;
}
