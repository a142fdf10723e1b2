/**
 * Wire types for the scenekit HTTP API.
 *
 * These mirror the JSON the service emits and accepts verbatim; the editor
 * never invents fields of its own on top of them.
 */

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // w, x, y, z

export type ShapeJson =
  | { type: "sphere"; radius: number }
  | { type: "box"; half_extents: Vec3 }
  | { type: "cylinder"; radius: number; half_height: number }
  | { type: "mesh"; path: string };

export interface ProxyJson {
  id: string;
  field: string;
  location: Vec3;
  rotation_quat: Quat;
  scale: Vec3;
  prompt: string;
  shape: ShapeJson | null;
  shape_weight: number;
}

export interface FieldSpecJson {
  checkpoint: string | null;
  channels: number;
}

export interface SceneJson {
  scene_prompt: string;
  bounds: { min: Vec3; max: Vec3 };
  seed: number;
  fields: Record<string, FieldSpecJson>;
  proxies: ProxyJson[];
}

export interface PlacementJson {
  location?: Vec3;
  rotation_quat?: Quat;
  scale?: Vec3;
}

/** POST /api/edit body. Allowed keys depend on kind; extras are rejected. */
export type EditJson =
  | { kind: "move"; proxy_id: string; placement: PlacementJson }
  | { kind: "remove"; proxy_id: string }
  | { kind: "duplicate"; proxy_id: string; new_id?: string; placement?: PlacementJson }
  | { kind: "geometry"; proxy_id: string; shape: ShapeJson; steps?: number }
  | { kind: "color"; field_id: string; steps?: number; target?: string; prompt?: string };

export interface CameraJson {
  eye: Vec3;
  look_at: Vec3;
  fov?: number; // radians
  up?: Vec3;
}

export interface RenderRequestJson {
  camera: CameraJson;
  resolution?: [number, number];
  n_samples?: number;
}

export interface TrainConfigJson {
  total_iters?: number;
  local_block?: number;
  global_block?: number;
  lr?: number;
  render_resolution?: [number, number];
  n_samples_per_ray?: number;
  shape_loss?: { weight?: number; n_points?: number };
  camera?: {
    radius_range?: [number, number];
    elevation_range?: [number, number];
    azimuth_range?: [number, number];
    fov?: number;
  };
  seed?: number;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobJson {
  job_id: string;
  kind: string;
  state: JobState;
  progress: { done: number; total: number };
  latest_preview: string | null;
  error: string | null;
}

export interface TrainEventJson {
  iter: number;
  kind: "local" | "global";
  object_id: string | null;
  losses: { guidance_norm: number; shape: number };
  wall_ms: number;
  skipped: boolean;
  error?: string;
}
