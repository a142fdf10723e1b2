/**
 * Wireframe viewport geometry.
 *
 * Builds 2D line segments for the scene: bounds box, each proxy as its
 * shape primitive at its placement, selection highlight, gizmo axes. No
 * volume rendering happens client-side; shaded previews always come from
 * the engine. The canvas drawing itself lives in app.ts so this stays
 * testable headlessly.
 */

import { Axis, axisColor, gizmoHandles, ViewContext } from "./gizmo";
import { objectToScene, Placement, project } from "./math";
import type { ProxyJson, SceneJson, ShapeJson, Vec3 } from "./types";

export interface Segment {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  color: string;
  width: number;
}

export interface ViewModel {
  segments: Segment[];
  handles: { axis: Axis; x: number; y: number; color: string }[];
  labels: { text: string; x: number; y: number; selected: boolean }[];
}

const BOUNDS_COLOR = "#8a8a8a";
const PROXY_COLOR = "#3fa7d6";
const SELECTED_COLOR = "#f2ac29";
const CIRCLE_SEGMENTS = 24;

type Polyline = Vec3[];

function circle(axisA: Vec3, axisB: Vec3, center: Vec3, radius: number): Polyline {
  const pts: Vec3[] = [];
  for (let i = 0; i <= CIRCLE_SEGMENTS; i++) {
    const a = (i / CIRCLE_SEGMENTS) * 2 * Math.PI;
    pts.push([
      center[0] + radius * (axisA[0] * Math.cos(a) + axisB[0] * Math.sin(a)),
      center[1] + radius * (axisA[1] * Math.cos(a) + axisB[1] * Math.sin(a)),
      center[2] + radius * (axisA[2] * Math.cos(a) + axisB[2] * Math.sin(a)),
    ]);
  }
  return pts;
}

function boxEdges(min: Vec3, max: Vec3): Polyline[] {
  const c = (i: number): Vec3 => [
    i & 1 ? max[0] : min[0],
    i & 2 ? max[1] : min[1],
    i & 4 ? max[2] : min[2],
  ];
  const pairs: [number, number][] = [
    [0, 1], [2, 3], [4, 5], [6, 7],
    [0, 2], [1, 3], [4, 6], [5, 7],
    [0, 4], [1, 5], [2, 6], [3, 7],
  ];
  return pairs.map(([a, b]) => [c(a), c(b)]);
}

/** Object-frame wireframe polylines for one shape. */
export function shapePolylines(shape: ShapeJson | null): Polyline[] {
  if (shape === null) {
    // shapeless proxies draw as a small canonical-frame octahedron marker
    const r = 0.5;
    const v: Vec3[] = [
      [r, 0, 0], [-r, 0, 0], [0, r, 0], [0, -r, 0], [0, 0, r], [0, 0, -r],
    ];
    const edges: [number, number][] = [
      [0, 2], [2, 1], [1, 3], [3, 0],
      [0, 4], [4, 1], [1, 5], [5, 0],
      [2, 4], [4, 3], [3, 5], [5, 2],
    ];
    return edges.map(([a, b]) => [v[a]!, v[b]!]);
  }
  switch (shape.type) {
    case "sphere": {
      const r = shape.radius;
      return [
        circle([1, 0, 0], [0, 1, 0], [0, 0, 0], r),
        circle([0, 1, 0], [0, 0, 1], [0, 0, 0], r),
        circle([0, 0, 1], [1, 0, 0], [0, 0, 0], r),
      ];
    }
    case "box": {
      const [hx, hy, hz] = shape.half_extents;
      return boxEdges([-hx, -hy, -hz], [hx, hy, hz]);
    }
    case "cylinder": {
      const { radius: r, half_height: h } = shape;
      const struts: Polyline[] = [
        [[r, -h, 0], [r, h, 0]],
        [[-r, -h, 0], [-r, h, 0]],
        [[0, -h, r], [0, h, r]],
        [[0, -h, -r], [0, h, -r]],
      ];
      return [
        circle([1, 0, 0], [0, 0, 1], [0, h, 0], r),
        circle([1, 0, 0], [0, 0, 1], [0, -h, 0], r),
        ...struts,
      ];
    }
    case "mesh":
      // mesh proxies draw their canonical bounds; geometry stays server-side
      return boxEdges([-1, -1, -1], [1, 1, 1]);
  }
}

function projectPolyline(
  ctx: ViewContext,
  pts: Polyline,
  color: string,
  width: number,
  out: Segment[],
): void {
  for (let i = 0; i + 1 < pts.length; i++) {
    const a = project(ctx.cam, ctx.basis, pts[i]!, ctx.width, ctx.height);
    const b = project(ctx.cam, ctx.basis, pts[i + 1]!, ctx.width, ctx.height);
    if (a.depth <= 0 || b.depth <= 0) continue; // behind the camera
    out.push({ x1: a.x, y1: a.y, x2: b.x, y2: b.y, color, width });
  }
}

function placementOf(proxy: ProxyJson): Placement {
  return {
    location: proxy.location,
    rotation_quat: proxy.rotation_quat,
    scale: proxy.scale,
  };
}

/** Everything the canvas needs to draw one frame. */
export function buildViewModel(
  ctx: ViewContext,
  scene: SceneJson | null,
  selection: string | null,
): ViewModel {
  const segments: Segment[] = [];
  const handles: ViewModel["handles"] = [];
  const labels: ViewModel["labels"] = [];
  if (!scene) return { segments, handles, labels };

  for (const edge of boxEdges(scene.bounds.min, scene.bounds.max)) {
    projectPolyline(ctx, edge, BOUNDS_COLOR, 1, segments);
  }

  for (const proxy of scene.proxies) {
    const placement = placementOf(proxy);
    const selected = proxy.id === selection;
    const color = selected ? SELECTED_COLOR : PROXY_COLOR;
    for (const line of shapePolylines(proxy.shape)) {
      const world = line.map((p) => objectToScene(placement, p));
      projectPolyline(ctx, world, color, selected ? 2 : 1, segments);
    }
    const center = project(ctx.cam, ctx.basis, placement.location, ctx.width, ctx.height);
    if (center.depth > 0) {
      labels.push({ text: proxy.id, x: center.x, y: center.y, selected });
    }
  }

  if (selection !== null) {
    const proxy = scene.proxies.find((p) => p.id === selection);
    if (proxy) {
      const placement = placementOf(proxy);
      for (const handle of gizmoHandles(ctx, placement)) {
        if (handle.behind) continue;
        segments.push({
          x1: handle.centerX,
          y1: handle.centerY,
          x2: handle.x,
          y2: handle.y,
          color: axisColor(handle.axis),
          width: 2,
        });
        handles.push({ axis: handle.axis, x: handle.x, y: handle.y, color: axisColor(handle.axis) });
      }
    }
  }

  return { segments, handles, labels };
}

/** The proxy whose projected center is nearest the pointer, or null. */
export function pickProxy(
  ctx: ViewContext,
  scene: SceneJson,
  px: number,
  py: number,
  pickRadius = 24,
): string | null {
  let best: string | null = null;
  let bestDist = pickRadius;
  for (const proxy of scene.proxies) {
    const center = project(ctx.cam, ctx.basis, proxy.location, ctx.width, ctx.height);
    if (center.depth <= 0) continue;
    const d = Math.hypot(center.x - px, center.y - py);
    if (d <= bestDist) {
      best = proxy.id;
      bestDist = d;
    }
  }
  return best;
}
