"""Drive training through the remote guidance wire protocol.

Starts the bundled mock guidance server in-process, points a RemoteGuidance
client at it, and runs a short training loop. The echo mode returns the
rendered image as its own gradient, so parameters drift toward darker
renders; the point here is the protocol round trip, not the result.
Also shows how a failing endpoint degrades: steps are skipped, not fatal.
"""

import numpy as np

from scenekit import (AABB, FieldRegistry, FieldSpec, ObjectProxy,
                      RemoteGuidance, SceneDescription, TrainConfig, train)
from scenekit.guidance import GuidanceRequest, remote_sds_gradient
from scenekit.mock_guidance import MockGuidanceServer
from scenekit.shape_prior import ShapeLossConfig

scene = SceneDescription(
    scene_prompt="a thing",
    bounds=AABB.cube(1.0),
    proxies=(ObjectProxy(proxy_id="p", field_id="f", object_prompt="a thing"),),
    fields={"f": FieldSpec(channels=3)},
)
config = TrainConfig(total_iters=30, local_block=2, global_block=1, lr=1e-3,
                     render_resolution=(16, 16), n_samples_per_ray=8,
                     shape_loss=ShapeLossConfig(weight=0.0), seed=0)

with MockGuidanceServer(mode="echo") as url:
    print(f"mock guidance server at {url}")

    # one raw protocol round trip: the echo server returns the image verbatim
    image = np.linspace(0, 1, 2 * 3 * 3, dtype=np.float32).reshape(2, 3, 3)
    reply = remote_sds_gradient(url, GuidanceRequest(image, prompt="probe"))
    print(f"echo round trip bit-exact: {np.array_equal(reply.gradient, image)}")

    registry, events = train(scene, config, RemoteGuidance(url))
    print(f"trained {len(events)} steps, "
          f"{sum(e.skipped for e in events)} skipped")
    print(f"server saw {len(events)} requests across local+global scopes")

# a dead endpoint: every step is skipped and reported, training still returns
registry, events = train(scene, config, RemoteGuidance("http://127.0.0.1:9",
                                                       timeout=0.2, retries=0))
skipped = [e for e in events if e.skipped]
print(f"dead endpoint: {len(skipped)}/{len(events)} steps skipped "
      f"(first error: {skipped[0].error})")
