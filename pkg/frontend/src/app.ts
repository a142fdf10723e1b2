/**
 * DOM wiring: one canvas viewport plus side panels, driven by EditorStore.
 *
 * Single-threaded event loop; pointer interactions mutate the mirror
 * immediately and commit on pointer-up. Job polling runs on a timer via
 * pollJob. This file is the only one that touches the document.
 */

import { ApiError, ServiceClient } from "./api";
import { Axis, GizmoMode, pickHandle, rotateDrag, scaleDrag, translateDrag, ViewContext, gizmoHandles } from "./gizmo";
import { cameraBasis, orbitEye, Placement } from "./math";
import { EditorStore } from "./state";
import { lossSeries, pollJob, progressFraction, runTrainJob } from "./jobs";
import { buildViewModel, pickProxy } from "./viewport";
import type { JobJson, ProxyJson, ShapeJson, TrainEventJson } from "./types";

interface DragState {
  proxyId: string;
  axis: Axis;
  start: Placement;
  fromX: number;
  fromY: number;
  moved: boolean;
}

export function mountEditor(root: HTMLElement, baseUrl: string): EditorStore {
  const client = new ServiceClient(baseUrl);
  const store = new EditorStore(client);

  root.innerHTML = `
    <div class="editor">
      <div class="viewport-pane">
        <canvas id="viewport" width="720" height="540"></canvas>
        <div class="toolbar">
          <button data-mode="translate" class="active">move</button>
          <button data-mode="rotate">rotate</button>
          <button data-mode="scale">scale</button>
          <span class="spacer"></span>
          <button id="add-proxy">add proxy</button>
          <button id="duplicate">duplicate</button>
          <button id="delete">delete</button>
        </div>
        <div id="banner" class="banner" hidden></div>
      </div>
      <div class="side-pane">
        <section>
          <h3>selection</h3>
          <div id="selection-info">none</div>
          <label>prompt <input id="prompt" type="text"></label>
        </section>
        <section>
          <h3>preview</h3>
          <button id="render-preview">render from viewport camera</button>
          <img id="preview" alt="no preview yet">
          <div id="preview-error" class="error"></div>
        </section>
        <section>
          <h3>training</h3>
          <label>iters <input id="train-iters" type="number" value="200"></label>
          <label>resolution <input id="train-res" type="number" value="48"></label>
          <button id="start-train">start train job</button>
          <button id="cancel-job" disabled>cancel</button>
          <progress id="job-progress" value="0" max="1"></progress>
          <span id="job-state"></span>
          <canvas id="loss-curve" width="280" height="120"></canvas>
          <img id="job-preview" alt="">
        </section>
      </div>
    </div>`;

  const canvas = root.querySelector<HTMLCanvasElement>("#viewport")!;
  const g2d = canvas.getContext("2d")!;
  const banner = root.querySelector<HTMLDivElement>("#banner")!;
  const promptInput = root.querySelector<HTMLInputElement>("#prompt")!;

  let mode: GizmoMode = "translate";
  let drag: DragState | null = null;
  let orbiting: { fromX: number; fromY: number } | null = null;
  let activeJob: JobJson | null = null;

  const viewContext = (): ViewContext => ({
    cam: store.state.camera,
    basis: cameraBasis(store.state.camera),
    width: canvas.width,
    height: canvas.height,
  });

  function draw(): void {
    const ctx = viewContext();
    const vm = buildViewModel(ctx, store.state.scene, store.state.selection);
    g2d.fillStyle = "#14161a";
    g2d.fillRect(0, 0, canvas.width, canvas.height);
    for (const seg of vm.segments) {
      g2d.strokeStyle = seg.color;
      g2d.lineWidth = seg.width;
      g2d.beginPath();
      g2d.moveTo(seg.x1, seg.y1);
      g2d.lineTo(seg.x2, seg.y2);
      g2d.stroke();
    }
    for (const handle of vm.handles) {
      g2d.fillStyle = handle.color;
      g2d.beginPath();
      g2d.arc(handle.x, handle.y, 5, 0, 2 * Math.PI);
      g2d.fill();
    }
    g2d.font = "11px sans-serif";
    for (const label of vm.labels) {
      g2d.fillStyle = label.selected ? "#f2ac29" : "#c8c8c8";
      g2d.fillText(label.text, label.x + 6, label.y - 6);
    }
    banner.hidden = store.state.banner === null;
    banner.textContent = store.state.banner ?? "";
    const info = root.querySelector<HTMLDivElement>("#selection-info")!;
    if (store.state.selection && store.state.scene) {
      const proxy = store.proxy(store.state.selection);
      info.textContent = `${proxy.id} (field ${proxy.field}) at [${proxy.location
        .map((v) => v.toFixed(2))
        .join(", ")}]${store.state.dirty ? " *pending*" : ""}`;
      promptInput.value = proxy.prompt;
    } else {
      info.textContent = "none";
      promptInput.value = store.state.scene?.scene_prompt ?? "";
    }
  }

  store.subscribe(draw);

  // -- pointer interactions ---------------------------------------------

  canvas.addEventListener("pointerdown", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const px = ev.clientX - rect.left;
    const py = ev.clientY - rect.top;
    const ctx = viewContext();
    if (store.state.selection && store.state.scene) {
      const placement = store.placement(store.state.selection);
      const handle = pickHandle(gizmoHandles(ctx, placement), px, py);
      if (handle) {
        drag = {
          proxyId: store.state.selection,
          axis: handle.axis,
          start: placement,
          fromX: px,
          fromY: py,
          moved: false,
        };
        canvas.setPointerCapture(ev.pointerId);
        return;
      }
    }
    if (store.state.scene) {
      const picked = pickProxy(ctx, store.state.scene, px, py);
      if (picked) {
        store.select(picked);
        return;
      }
    }
    store.select(null);
    orbiting = { fromX: px, fromY: py };
    canvas.setPointerCapture(ev.pointerId);
  });

  canvas.addEventListener("pointermove", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const px = ev.clientX - rect.left;
    const py = ev.clientY - rect.top;
    if (drag) {
      const ctx = viewContext();
      const next =
        mode === "translate"
          ? translateDrag(ctx, drag.start, drag.axis, drag.fromX, drag.fromY, px, py)
          : mode === "rotate"
            ? rotateDrag(ctx, drag.start, drag.axis, drag.fromX, drag.fromY, px, py)
            : scaleDrag(ctx, drag.start, drag.axis, drag.fromX, drag.fromY, px, py);
      drag.moved = true;
      store.localMove(drag.proxyId, next);
      return;
    }
    if (orbiting) {
      const cam = store.state.camera;
      cam.azimuth -= (px - orbiting.fromX) * 0.01;
      cam.elevation = Math.max(
        -1.4,
        Math.min(1.4, cam.elevation + (py - orbiting.fromY) * 0.01),
      );
      orbiting = { fromX: px, fromY: py };
      draw();
    }
  });

  canvas.addEventListener("pointerup", () => {
    if (drag?.moved) {
      store.commitMove(drag.proxyId).catch(() => undefined); // surfaced on the banner
    }
    drag = null;
    orbiting = null;
  });

  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const cam = store.state.camera;
    cam.radius = Math.max(0.5, Math.min(20, cam.radius * (ev.deltaY > 0 ? 1.1 : 0.9)));
    draw();
  });

  // -- toolbar ------------------------------------------------------------

  for (const button of root.querySelectorAll<HTMLButtonElement>("[data-mode]")) {
    button.addEventListener("click", () => {
      mode = button.dataset.mode as GizmoMode;
      for (const other of root.querySelectorAll("[data-mode]")) {
        other.classList.toggle("active", other === button);
      }
    });
  }

  let proxyCounter = 0;
  root.querySelector("#add-proxy")!.addEventListener("click", () => {
    const scene = store.state.scene;
    if (!scene) return;
    let id = "";
    do {
      proxyCounter += 1;
      id = `proxy-${proxyCounter}`;
    } while (scene.proxies.some((p) => p.id === id));
    const shape: ShapeJson = { type: "sphere", radius: 1.0 };
    const proxy: ProxyJson = {
      id,
      field: `f_${id}`,
      location: [0, 0, 0],
      rotation_quat: [1, 0, 0, 0],
      scale: [0.4, 0.4, 0.4],
      prompt: "",
      shape,
      shape_weight: 1.0,
    };
    store
      .createProxy(proxy)
      .then(() => store.select(id))
      .catch(() => undefined);
  });

  root.querySelector("#duplicate")!.addEventListener("click", () => {
    const selected = store.state.selection;
    if (!selected) return;
    store.duplicate(selected, `${selected}-copy-${Date.now() % 10000}`).catch(() => undefined);
  });

  root.querySelector("#delete")!.addEventListener("click", () => {
    const selected = store.state.selection;
    if (selected) store.remove(selected).catch(() => undefined);
  });

  promptInput.addEventListener("change", () => {
    store.setPrompt(store.state.selection, promptInput.value).catch(() => undefined);
  });

  // -- preview --------------------------------------------------------------

  const previewImg = root.querySelector<HTMLImageElement>("#preview")!;
  const previewError = root.querySelector<HTMLDivElement>("#preview-error")!;
  root.querySelector("#render-preview")!.addEventListener("click", async () => {
    const cam = store.state.camera;
    previewError.textContent = "";
    try {
      const result = await client.render({
        camera: { eye: orbitEye(cam), look_at: cam.target, fov: cam.fov },
        resolution: [192, 144],
        n_samples: 48,
      });
      const blob = new Blob([result.png], { type: "image/png" });
      const url = URL.createObjectURL(blob);
      previewImg.onload = () => URL.revokeObjectURL(url);
      previewImg.src = url;
    } catch (err) {
      previewError.textContent = (err as ApiError).message;
    }
  });

  // -- job console ------------------------------------------------------------

  const progressBar = root.querySelector<HTMLProgressElement>("#job-progress")!;
  const jobState = root.querySelector<HTMLSpanElement>("#job-state")!;
  const cancelButton = root.querySelector<HTMLButtonElement>("#cancel-job")!;
  const lossCanvas = root.querySelector<HTMLCanvasElement>("#loss-curve")!;
  const jobPreview = root.querySelector<HTMLImageElement>("#job-preview")!;

  function drawLossCurve(events: TrainEventJson[]): void {
    const { iters, guidance } = lossSeries(events);
    const ctx = lossCanvas.getContext("2d")!;
    ctx.fillStyle = "#14161a";
    ctx.fillRect(0, 0, lossCanvas.width, lossCanvas.height);
    if (iters.length < 2) return;
    const max = Math.max(...guidance, 1e-9);
    ctx.strokeStyle = "#3fa7d6";
    ctx.beginPath();
    iters.forEach((iter, i) => {
      const x = (iter / Math.max(...iters, 1)) * lossCanvas.width;
      const y = lossCanvas.height * (1 - guidance[i]! / max);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }

  async function watchJob(job: JobJson): Promise<void> {
    activeJob = job;
    cancelButton.disabled = false;
    store.setJobs([job]);
    const final = await pollJob(client, job.job_id, {
      intervalMs: 700,
      onUpdate: async (j) => {
        activeJob = j;
        progressBar.value = progressFraction(j);
        jobState.textContent = `${j.state} ${j.progress.done}/${j.progress.total}`;
        store.setJobs([j]);
        if (j.latest_preview) {
          jobPreview.src = `${client.previewUrl(j.job_id)}?t=${j.progress.done}`;
        }
        drawLossCurve(await client.getEvents(j.job_id).catch(() => []));
      },
    });
    cancelButton.disabled = true;
    activeJob = null;
    store.setJobs([]);
    jobState.textContent = final.state + (final.error ? `: ${final.error}` : "");
    await store.load(); // pick up trained checkpoints in the mirror
  }

  root.querySelector("#start-train")!.addEventListener("click", async () => {
    const iters = Number(root.querySelector<HTMLInputElement>("#train-iters")!.value) || 200;
    const res = Number(root.querySelector<HTMLInputElement>("#train-res")!.value) || 48;
    try {
      const job = await client.startTrain(
        {
          total_iters: iters,
          render_resolution: [res, res],
          n_samples_per_ray: 32,
        },
        25,
      );
      await watchJob(job);
    } catch (err) {
      store.setBanner((err as ApiError).message);
    }
  });

  cancelButton.addEventListener("click", () => {
    if (activeJob) client.cancelJob(activeJob.job_id).catch(() => undefined);
  });

  store.load().then(draw).catch((err) => store.setBanner((err as ApiError).message));
  return store;
}
