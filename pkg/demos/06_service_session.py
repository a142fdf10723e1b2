"""Exercise the HTTP service end to end from a client.

Boots the app in-process with a test client (no sockets), uploads a scene,
renders it, runs a short training job with photometric guidance, polls it
to completion, then applies a placement edit and a color fine-tune through
the edit endpoint.
"""

import json
import time
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from scenekit import (AABB, FieldRegistry, FieldSpec, ObjectProxy,
                      RigidPlacement, SceneDescription, Sphere,
                      make_analytic_field, render_composed, sample_camera,
                      save_render)
from scenekit.service import ServiceState, create_app
from scenekit.training import CameraDistribution

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

scene = SceneDescription(
    scene_prompt="two balls",
    bounds=AABB.cube(1.5),
    proxies=(
        ObjectProxy(proxy_id="a", field_id="fa", object_prompt="a red ball",
                    placement=RigidPlacement(location=(-0.45, 0.0, 0.0),
                                             scale=(0.4, 0.4, 0.4)),
                    shape=Sphere(radius=1.0)),
        ObjectProxy(proxy_id="b", field_id="fb", object_prompt="a blue ball",
                    placement=RigidPlacement(location=(0.45, 0.0, 0.0),
                                             scale=(0.4, 0.4, 0.4)),
                    shape=Sphere(radius=1.0)),
    ),
    fields={"fa": FieldSpec(channels=3), "fb": FieldSpec(channels=3)},
)

# photometric target image for the training job, written next to the scene
FIXED = CameraDistribution(radius_range=(2.8, 2.8), elevation_range=(0.4, 0.4),
                           azimuth_range=(0.7, 0.7))
analytic = FieldRegistry({
    "fa": make_analytic_field("sphere", sigma_inside=25.0, radius=0.55,
                              albedo=(0.9, 0.2, 0.1)),
    "fb": make_analytic_field("sphere", sigma_inside=25.0, radius=0.55,
                              albedo=(0.15, 0.3, 0.95)),
})

rng = np.random.Generator(np.random.PCG64(0))
cam = sample_camera(FIXED, "scene", rng, resolution=(24, 24),
                    scene_bounds=scene.bounds)
target = render_composed(scene, analytic, cam, 16)
target_path = OUT / "service_target.pfm"
save_render(target, target_path)

registry = FieldRegistry.from_scene(scene, base_dir=OUT, hidden=32, levels=4)
state = ServiceState(scene, registry, base_dir=OUT,
                     guidance_spec=f"photometric:{target_path}",
                     preview_dir=OUT / "previews")
client = TestClient(create_app(state))

print("GET /api/scene:", len(client.get("/api/scene").json()["proxies"]), "proxies")

render = client.post("/api/render", json={
    "camera": {"eye": [0.0, 0.6, 2.4], "look_at": [0, 0, 0],
               "resolution": [128, 128]},
    "n_samples": 48,
})
(OUT / "service_render.png").write_bytes(render.content)
print("POST /api/render ->", render.headers["content-type"],
      f"opacity at {render.headers['x-opacity-pfm']}")

job = client.post("/api/jobs/train?preview_every=20", json={
    "total_iters": 60, "local_block": 5, "global_block": 2, "lr": 5e-3,
    "render_resolution": [24, 24], "n_samples_per_ray": 16,
    "shape_loss": {"weight": 0.0},
    "camera": {"radius_range": [2.8, 2.8], "elevation_range": [0.4, 0.4],
               "azimuth_range": [0.7, 0.7]},
}).json()
print("job", job["job_id"], "queued")
while True:
    status = client.get(f"/api/jobs/{job['job_id']}").json()
    if status["state"] in ("done", "failed"):
        break
    time.sleep(0.3)
progress = status["progress"]
print("job finished:", status["state"], f"{progress['done']}/{progress['total']}")

events = client.get(f"/api/jobs/{job['job_id']}/events").json()["events"]
print("last event:", json.dumps(events[-1]["losses"]))

edit = client.post("/api/edit", json={
    "kind": "move", "proxy_id": "a",
    "placement": {"location": [-0.45, 0.3, 0.0], "scale": [0.4, 0.4, 0.4]}})
moved = [p for p in edit.json()["proxies"] if p["id"] == "a"][0]
print("move edit applied:", moved["location"])

recolor = client.post("/api/edit", json={"kind": "color", "field_id": "fa",
                                         "steps": 20}).json()
while True:
    status = client.get(f"/api/jobs/{recolor['job_id']}").json()
    if status["state"] in ("done", "failed"):
        break
    time.sleep(0.2)
print("color fine-tune:", status["state"])
print("fields:", list(client.get("/api/fields").json()["fields"]))
