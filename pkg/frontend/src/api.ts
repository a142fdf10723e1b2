/**
 * Typed client for the scenekit HTTP API.
 *
 * One method per documented endpoint, nothing else: the editor talks to the
 * reference service with zero custom routes. Server errors carry the
 * service's own message; network failures surface with status 0.
 */

import type {
  EditJson,
  JobJson,
  RenderRequestJson,
  SceneJson,
  TrainConfigJson,
  TrainEventJson,
} from "./types";

export class ApiError extends Error {
  readonly status: number;
  readonly violations: string[];

  constructor(status: number, message: string, violations: string[] = []) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.violations = violations;
  }
}

export interface RenderResult {
  png: ArrayBuffer;
  opacityUrl: string | null; // relative URL from the X-Opacity-PFM header
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `network failure: ${(err as Error).message}`);
    }
    if (!response.ok) {
      let message = `${response.status}`;
      let violations: string[] = [];
      try {
        const body = await response.json();
        if (typeof body?.error === "string") message = body.error;
        if (Array.isArray(body?.violations)) violations = body.violations;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, message, violations);
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  private post(path: string, body: unknown): Promise<Response> {
    return this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getScene(): Promise<SceneJson> {
    return this.json<SceneJson>("/api/scene");
  }

  putScene(scene: SceneJson): Promise<SceneJson> {
    return this.json<SceneJson>("/api/scene", {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(scene),
    });
  }

  /** Composed render; returns PNG bytes plus the opacity PFM reference. */
  async render(params: RenderRequestJson): Promise<RenderResult> {
    const response = await this.post("/api/render", params);
    return {
      png: await response.arrayBuffer(),
      opacityUrl: response.headers.get("x-opacity-pfm"),
    };
  }

  async renderObject(params: RenderRequestJson & { field_id: string }): Promise<RenderResult> {
    const response = await this.post("/api/render-object", params);
    return {
      png: await response.arrayBuffer(),
      opacityUrl: response.headers.get("x-opacity-pfm"),
    };
  }

  /** Placement edits answer with the updated scene; fine-tunes with a job. */
  async edit(edit: EditJson): Promise<SceneJson | JobJson> {
    const response = await this.post("/api/edit", edit);
    return (await response.json()) as SceneJson | JobJson;
  }

  async startTrain(config: TrainConfigJson, previewEvery?: number): Promise<JobJson> {
    const query = previewEvery === undefined ? "" : `?preview_every=${previewEvery}`;
    const response = await this.post(`/api/jobs/train${query}`, config);
    return (await response.json()) as JobJson;
  }

  getJob(jobId: string): Promise<JobJson> {
    return this.json<JobJson>(`/api/jobs/${jobId}`);
  }

  async getEvents(jobId: string): Promise<TrainEventJson[]> {
    const body = await this.json<{ events: TrainEventJson[] }>(`/api/jobs/${jobId}/events`);
    return body.events;
  }

  async cancelJob(jobId: string): Promise<JobJson> {
    const response = await this.post(`/api/jobs/${jobId}/cancel`, {});
    return (await response.json()) as JobJson;
  }

  /** URL of the latest preview frame; the <img> src polls this directly. */
  previewUrl(jobId: string): string {
    return `${this.baseUrl}/api/jobs/${jobId}/preview`;
  }

  getFields(): Promise<{ fields: Record<string, Record<string, unknown>> }> {
    return this.json("/api/fields");
  }
}
