"""Reference mock guidance server.

Speaks the gradient wire protocol over plain stdlib HTTP so protocol
conformance can be tested with no external model. Behaviors:

    zeros        gradient of zeros (default)
    echo         gradient equals the request image, bit for bit
    wrong_shape  gradient payload three floats short (client must reject)
    http_error   responds 500 with a plain-text body
    slow         sleeps `delay` seconds before answering (timeout tests)
    bad_json     responds 200 with a non-JSON body

Run standalone:  python -m scenekit.mock_guidance --port 8642 --mode echo
"""

from __future__ import annotations

import argparse
import base64
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np


class MockGuidanceServer:
    """In-process server for tests: with MockGuidanceServer(mode="echo") as url: ..."""

    def __init__(self, mode: str = "zeros", scale: float = 1.0, delay: float = 0.0,
                 port: int = 0):
        self.mode = mode
        self.scale = scale
        self.delay = delay
        self.requests_seen: list[dict] = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                if self.path != "/gradient":
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                outer.requests_seen.append(
                    {k: body[k] for k in ("width", "height", "channels", "prompt", "step")})
                if outer.delay > 0:
                    time.sleep(outer.delay)
                if outer.mode == "http_error":
                    self.send_response(500)
                    self.send_header("Content-Type", "text/plain")
                    self.end_headers()
                    self.wfile.write(b"mock guidance failure")
                    return
                if outer.mode == "bad_json":
                    self.send_response(200)
                    self.send_header("Content-Type", "text/plain")
                    self.end_headers()
                    self.wfile.write(b"not json at all")
                    return
                count = body["width"] * body["height"] * body["channels"]
                if outer.mode == "echo":
                    grad_b64 = body["image"]
                elif outer.mode == "wrong_shape":
                    short = np.zeros(max(count - 3, 0), dtype="<f4")
                    grad_b64 = base64.b64encode(short.tobytes()).decode("ascii")
                else:  # zeros
                    grad_b64 = base64.b64encode(
                        np.zeros(count, dtype="<f4").tobytes()).decode("ascii")
                payload = json.dumps({"gradient": grad_b64, "scale": outer.scale})
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.end_headers()
                self.wfile.write(payload.encode("ascii"))

        self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_port}"

    def start(self) -> "MockGuidanceServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> str:
        self.start()
        return self.url

    def __exit__(self, *exc) -> None:
        self.stop()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="mock guidance server")
    parser.add_argument("--port", type=int, default=8642)
    parser.add_argument("--mode", default="zeros",
                        choices=["zeros", "echo", "wrong_shape", "http_error",
                                 "slow", "bad_json"])
    parser.add_argument("--scale", type=float, default=1.0)
    parser.add_argument("--delay", type=float, default=0.0)
    args = parser.parse_args(argv)
    delay = args.delay if args.mode != "slow" else max(args.delay, 5.0)
    server = MockGuidanceServer(mode=args.mode, scale=args.scale, delay=delay,
                                port=args.port)
    print(f"mock guidance server ({args.mode}) on {server.url}")
    server.start()
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
