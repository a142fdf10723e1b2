/**
 * Editor state: a client-side mirror of the server scene plus UI bits.
 *
 * The mirror only diverges from the server between a local edit and its
 * acknowledgment; every mutation goes through the documented API and is
 * reconciled from the server's response. On conflict (409) or network
 * failure the mirror reverts to the last acknowledged scene and the
 * problem is surfaced on the banner. At most one mutation is in flight.
 */

import { ApiError, ServiceClient } from "./api";
import type { OrbitCamera, Placement } from "./math";
import type { JobJson, PlacementJson, ProxyJson, SceneJson, ShapeJson } from "./types";

export interface EditorState {
  scene: SceneJson | null; // the mirror, possibly with pending local edits
  selection: string | null;
  camera: OrbitCamera;
  dirty: boolean; // true iff the mirror holds unacknowledged local edits
  jobs: JobJson[];
  banner: string | null;
}

export type Listener = (state: EditorState) => void;

function clone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

function placementOf(proxy: ProxyJson): Placement {
  return {
    location: proxy.location,
    rotation_quat: proxy.rotation_quat,
    scale: proxy.scale,
  };
}

export class EditorStore {
  readonly client: ServiceClient;
  state: EditorState;
  private acked: SceneJson | null = null; // last server-acknowledged scene
  private inflight: Promise<unknown> = Promise.resolve();
  private listeners: Listener[] = [];

  constructor(client: ServiceClient, camera?: OrbitCamera) {
    this.client = client;
    this.state = {
      scene: null,
      selection: null,
      camera: camera ?? { target: [0, 0, 0], radius: 3, azimuth: 0.6, elevation: 0.35, fov: Math.PI / 3 },
      dirty: false,
      jobs: [],
      banner: null,
    };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private setScene(scene: SceneJson, acknowledged: boolean): void {
    this.state.scene = scene;
    if (acknowledged) {
      this.acked = clone(scene);
      this.state.dirty = false;
    } else {
      this.state.dirty = true;
    }
    this.emit();
  }

  /** Pull the server scene and reset the mirror to it. */
  async load(): Promise<void> {
    this.setScene(await this.client.getScene(), true);
  }

  select(proxyId: string | null): void {
    this.state.selection = proxyId;
    this.emit();
  }

  setBanner(message: string | null): void {
    this.state.banner = message;
    this.emit();
  }

  proxy(proxyId: string): ProxyJson {
    const found = this.state.scene?.proxies.find((p) => p.id === proxyId);
    if (!found) throw new Error(`no proxy ${proxyId} in the mirror`);
    return found;
  }

  placement(proxyId: string): Placement {
    return placementOf(this.proxy(proxyId));
  }

  /**
   * Apply a placement to the mirror immediately (gizmo drag feedback).
   * The edit is pending until commitMove acknowledges it.
   */
  localMove(proxyId: string, placement: Placement): void {
    if (!this.state.scene) throw new Error("no scene loaded");
    const scene = clone(this.state.scene);
    const proxy = scene.proxies.find((p) => p.id === proxyId);
    if (!proxy) throw new Error(`no proxy ${proxyId} in the mirror`);
    proxy.location = clone(placement.location);
    proxy.rotation_quat = clone(placement.rotation_quat);
    proxy.scale = clone(placement.scale);
    this.setScene(scene, false);
  }

  private revert(error: ApiError): void {
    if (this.acked) this.setScene(clone(this.acked), true);
    this.state.banner =
      error.status === 409
        ? `training is running: ${error.message}`
        : error.status === 0
          ? `network failure, retry? (${error.message})`
          : error.message;
    this.emit();
    throw error;
  }

  /** Serialize mutations: at most one in flight, in call order. */
  private enqueue<T>(op: () => Promise<T>): Promise<T> {
    const next = this.inflight.then(op, op);
    this.inflight = next.catch(() => undefined);
    return next;
  }

  /** Push the mirror's placement of one proxy to the server. */
  commitMove(proxyId: string): Promise<SceneJson> {
    return this.enqueue(async () => {
      const placement = this.placement(proxyId);
      const body: PlacementJson = {
        location: placement.location,
        rotation_quat: placement.rotation_quat,
        scale: placement.scale,
      };
      try {
        const scene = (await this.client.edit({
          kind: "move",
          proxy_id: proxyId,
          placement: body,
        })) as SceneJson;
        this.setScene(scene, true);
        this.state.banner = null;
        return scene;
      } catch (err) {
        this.revert(err as ApiError);
        throw err; // unreachable; revert always throws
      }
    });
  }

  /**
   * Add a brand-new proxy (with a fresh field entry when needed) and sync
   * via PUT /api/scene. Optimistic: the mirror shows it immediately.
   */
  createProxy(proxy: ProxyJson, channels = 3): Promise<SceneJson> {
    return this.enqueue(async () => {
      if (!this.state.scene) throw new Error("no scene loaded");
      const scene = clone(this.state.scene);
      if (scene.proxies.some((p) => p.id === proxy.id)) {
        throw new Error(`proxy id ${proxy.id} already exists`);
      }
      scene.proxies.push(clone(proxy));
      if (!(proxy.field in scene.fields)) {
        scene.fields[proxy.field] = { checkpoint: null, channels };
      }
      this.setScene(scene, false);
      try {
        const acked = await this.client.putScene(scene);
        this.setScene(acked, true);
        this.state.banner = null;
        return acked;
      } catch (err) {
        this.revert(err as ApiError);
        throw err;
      }
    });
  }

  duplicate(proxyId: string, newId: string): Promise<SceneJson> {
    return this.enqueue(async () => {
      try {
        const scene = (await this.client.edit({
          kind: "duplicate",
          proxy_id: proxyId,
          new_id: newId,
        })) as SceneJson;
        this.setScene(scene, true);
        return scene;
      } catch (err) {
        this.revert(err as ApiError);
        throw err;
      }
    });
  }

  remove(proxyId: string): Promise<SceneJson> {
    return this.enqueue(async () => {
      try {
        const scene = (await this.client.edit({
          kind: "remove",
          proxy_id: proxyId,
        })) as SceneJson;
        if (this.state.selection === proxyId) this.state.selection = null;
        this.setScene(scene, true);
        return scene;
      } catch (err) {
        this.revert(err as ApiError);
        throw err;
      }
    });
  }

  /** Update an object prompt (or the scene prompt) and PUT the scene. */
  setPrompt(proxyId: string | null, prompt: string): Promise<SceneJson> {
    return this.enqueue(async () => {
      if (!this.state.scene) throw new Error("no scene loaded");
      const scene = clone(this.state.scene);
      if (proxyId === null) {
        scene.scene_prompt = prompt;
      } else {
        const proxy = scene.proxies.find((p) => p.id === proxyId);
        if (!proxy) throw new Error(`no proxy ${proxyId} in the mirror`);
        proxy.prompt = prompt;
      }
      this.setScene(scene, false);
      try {
        const acked = await this.client.putScene(scene);
        this.setScene(acked, true);
        return acked;
      } catch (err) {
        this.revert(err as ApiError);
        throw err;
      }
    });
  }

  /** Swap a proxy's shape without fine-tuning (steps=0 stays synchronous). */
  setShape(proxyId: string, shape: ShapeJson): Promise<SceneJson> {
    return this.enqueue(async () => {
      if (!this.state.scene) throw new Error("no scene loaded");
      const scene = clone(this.state.scene);
      const proxy = scene.proxies.find((p) => p.id === proxyId);
      if (!proxy) throw new Error(`no proxy ${proxyId} in the mirror`);
      proxy.shape = clone(shape);
      this.setScene(scene, false);
      try {
        const acked = await this.client.putScene(scene);
        this.setScene(acked, true);
        return acked;
      } catch (err) {
        this.revert(err as ApiError);
        throw err;
      }
    });
  }

  setJobs(jobs: JobJson[]): void {
    this.state.jobs = jobs;
    this.emit();
  }
}
