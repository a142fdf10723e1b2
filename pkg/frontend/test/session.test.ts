/**
 * Scripted editor session against the real service: create a proxy, move it
 * with the gizmo, request a preview, run a 30-iteration training job, and
 * check that the server scene matches the UI mirror at every acknowledged
 * step. Spawns `scenekit serve` as a child process; requires the Python
 * package to be installed (pip install -e . --no-build-isolation).
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api";
import { gizmoHandles, translateDrag, type ViewContext } from "../src/gizmo";
import { runTrainJob } from "../src/jobs";
import { cameraBasis, orbitEye, orbitFromLookAt } from "../src/math";
import { EditorStore } from "../src/state";
import type { JobJson, ProxyJson } from "../src/types";

const PORT = 8000 + 1000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess;
let serverLog = "";

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 200; i++) {
    try {
      const res = await fetch(`${BASE}/api/scene`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 300));
  }
  throw new Error(`service never came up on ${BASE}\n${serverLog}`);
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "editor-session-"));
  const scenePath = join(workdir, "scene.json");
  const targetPath = join(workdir, "target.pfm");
  execFileSync("python3", ["-m", "scenekit.cli", "init", "--scene", scenePath]);
  execFileSync("python3", [
    "-c",
    `import numpy as np; from scenekit import write_pfm; write_pfm(${JSON.stringify(
      targetPath,
    )}, np.full((24, 24, 3), 0.4, dtype=np.float32))`,
  ]);
  server = spawn(
    "python3",
    [
      "-m", "scenekit.cli", "serve",
      "--scene", scenePath,
      "--host", "127.0.0.1",
      "--port", String(PORT),
      "--guidance", `photometric:${targetPath}`,
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  server.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  await waitForServer();
});

afterAll(async () => {
  if (server && server.exitCode === null) {
    server.kill("SIGTERM");
    await new Promise((resolve) => server.once("exit", resolve));
  }
  rmSync(workdir, { recursive: true, force: true });
});

describe("editor session against the live service", () => {
  const client = () => new ServiceClient(BASE);

  /** The acknowledged-step invariant: clean mirror, identical server scene. */
  async function expectMirrorMatchesServer(store: EditorStore): Promise<void> {
    expect(store.state.dirty).toBe(false);
    const server = await store.client.getScene();
    expect(store.state.scene).toEqual(server);
  }

  it("runs create, move, preview, and a 30-iteration train to done", async () => {
    const store = new EditorStore(client());
    await store.load();
    await expectMirrorMatchesServer(store);
    expect(store.state.scene!.proxies.map((p) => p.id)).toEqual(["ball", "crate"]);

    // -- create a proxy (PUT /api/scene with a fresh field) -------------------
    const lamp: ProxyJson = {
      id: "lamp",
      field: "f_lamp",
      location: [0, 0.6, 0],
      rotation_quat: [1, 0, 0, 0],
      scale: [0.3, 0.3, 0.3],
      prompt: "a small brass lamp",
      shape: { type: "sphere", radius: 1.0 },
      shape_weight: 1.0,
    };
    await store.createProxy(lamp);
    await expectMirrorMatchesServer(store);
    expect(store.state.scene!.proxies.map((p) => p.id)).toEqual(["ball", "crate", "lamp"]);
    expect(store.state.scene!.fields.f_lamp).toBeDefined();

    // -- move it via the gizmo ------------------------------------------------
    store.select("lamp");
    const cam = store.state.camera;
    const view: ViewContext = { cam, basis: cameraBasis(cam), width: 720, height: 540 };
    const before = store.placement("lamp");
    const handle = gizmoHandles(view, before).find((h) => h.axis === 0)!;
    expect(handle.behind).toBe(false);
    // drag 40px outward along the handle's own screen direction
    const hx = handle.x - handle.centerX;
    const hy = handle.y - handle.centerY;
    const hlen = Math.hypot(hx, hy);
    const dragged = translateDrag(
      view,
      before,
      0,
      handle.x,
      handle.y,
      handle.x + (hx / hlen) * 40,
      handle.y + (hy / hlen) * 40,
    );
    expect(dragged.location).not.toEqual(before.location);
    store.localMove("lamp", dragged);
    expect(store.state.dirty).toBe(true); // pending: mirror deliberately ahead
    const serverScene = await store.client.getScene();
    expect(serverScene.proxies.find((p) => p.id === "lamp")!.location).toEqual(before.location);

    await store.commitMove("lamp");
    await expectMirrorMatchesServer(store);
    const moved = store.proxy("lamp").location;
    expect(moved[0]).toBeCloseTo(dragged.location[0], 12);
    expect(moved).not.toEqual(before.location);

    // -- request a preview with the viewport camera ---------------------------
    const eye = orbitEye(cam);
    const render = await store.client.render({
      camera: { eye, look_at: cam.target, fov: cam.fov },
      resolution: [48, 36],
      n_samples: 8,
    });
    const png = new Uint8Array(render.png);
    expect([...png.slice(0, 4)]).toEqual([0x89, 0x50, 0x4e, 0x47]); // PNG magic
    expect(render.opacityUrl).toMatch(/opacity\.pfm$/);
    // the pose survives the orbit round-trip well inside 1e-4
    const recovered = orbitFromLookAt(eye, cam.target, cam.fov);
    const eye2 = orbitEye(recovered);
    for (let i = 0; i < 3; i++) expect(Math.abs(eye2[i]! - eye[i]!)).toBeLessThan(1e-4);
    expect(recovered.fov).toBe(cam.fov);
    // rendering never mutates scene state
    await expectMirrorMatchesServer(store);
    const again = await store.client.render({
      camera: { eye, look_at: cam.target, fov: cam.fov },
      resolution: [48, 36],
      n_samples: 8,
    });
    expect(new Uint8Array(again.png)).toEqual(png); // idempotent

    // -- 30-iteration training job to done ------------------------------------
    const updates: JobJson[] = [];
    const final = await runTrainJob(
      store.client,
      {
        total_iters: 30,
        local_block: 5,
        render_resolution: [24, 24],
        n_samples_per_ray: 16,
        shape_loss: { n_points: 64 },
      },
      {
        intervalMs: 250,
        previewEvery: 10,
        onUpdate: (job) => {
          updates.push(job);
          store.setJobs([job]);
        },
      },
    );
    expect(final.state).toBe("done");
    expect(final.progress).toEqual({ done: 30, total: 30 });
    expect(final.error).toBeNull();
    // progress only ever advances
    const dones = updates.map((u) => u.progress.done);
    for (let i = 1; i < dones.length; i++) expect(dones[i]!).toBeGreaterThanOrEqual(dones[i - 1]!);
    const events = await store.client.getEvents(final.job_id);
    expect(events).toHaveLength(30);
    expect(events.map((e) => e.iter)).toEqual([...Array(30).keys()]);

    // the job retrained fields; refresh and verify the mirror one last time
    await store.load();
    await expectMirrorMatchesServer(store);
    expect(store.state.scene!.proxies.map((p) => p.id)).toEqual(["ball", "crate", "lamp"]);
  });
});
