"""A bundled in-process server speaking the provider protocol.

The server answers every capability route from a :class:`GroundTruthOracle`,
so it doubles as the reference implementation of the wire protocol and as a
test double.  Fault injection (`fail_next`) makes the next N requests either
drop the connection or answer 500, which is how the client's retry policy is
exercised without a flaky network.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..clicks import ClickSet
from ..contrastive import ClassPrompts
from .base import CLICK_SUGGEST, MASK_PROPOSALS, PROBABILITY_MAP, SEGMENT
from .oracle import GroundTruthOracle
from .wire import image_from_png_b64, mask_to_png_b64, values_to_b64

ROUTES = {
    "/v1/probability-map": PROBABILITY_MAP,
    "/v1/mask-proposals": MASK_PROPOSALS,
    "/v1/segment": SEGMENT,
    "/v1/clicks": CLICK_SUGGEST,
}


class _BadRequest(ValueError):
    pass


class _QuietServer(ThreadingHTTPServer):
    daemon_threads = True

    def handle_error(self, request, client_address):
        pass  # injected connection drops are expected; don't spam stderr


class MockProviderServer:
    """Serve all four capability routes for one configured ground truth."""

    def __init__(self, oracle: GroundTruthOracle, *, token: str | None = None, host: str = "127.0.0.1"):
        self.oracle = oracle
        self.token = token
        self._lock = threading.Lock()
        self._fail_remaining = 0
        self._fail_kind = "status"
        self.requests_seen: list[dict] = []
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def do_POST(self):
                server._handle(self)

        self._httpd = _QuietServer((host, 0), Handler)
        self._thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def endpoint(self, capability: str) -> str:
        for path, cap in ROUTES.items():
            if cap == capability:
                return self.base_url + path
        raise ValueError(f"unknown capability {capability!r}")

    def start(self) -> "MockProviderServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    # -- fault injection ---------------------------------------------------

    def fail_next(self, count: int, kind: str = "status"):
        """Make the next ``count`` requests fail: ``status`` answers 500, ``close`` drops the socket."""
        if kind not in ("status", "close"):
            raise ValueError(f"unknown fault kind {kind!r}")
        with self._lock:
            self._fail_remaining = count
            self._fail_kind = kind

    def _take_fault(self) -> str | None:
        with self._lock:
            if self._fail_remaining > 0:
                self._fail_remaining -= 1
                return self._fail_kind
        return None

    # -- request handling --------------------------------------------------

    def _handle(self, req: BaseHTTPRequestHandler):
        with self._lock:
            self.requests_seen.append(
                {
                    "path": req.path,
                    "idempotency_key": req.headers.get("Idempotency-Key", ""),
                    "authorization": req.headers.get("Authorization", ""),
                }
            )
        fault = self._take_fault()
        if fault == "close":
            req.connection.close()
            return
        if fault == "status":
            self._send(req, 500, {"error": "injected failure"})
            return
        if self.token and req.headers.get("Authorization") != f"Bearer {self.token}":
            self._send(req, 401, {"error": "missing or invalid bearer token"})
            return
        capability = ROUTES.get(req.path)
        if capability is None:
            self._send(req, 404, {"error": f"unknown route {req.path}"})
            return
        try:
            length = int(req.headers.get("Content-Length", "0"))
            payload = json.loads(req.rfile.read(length) or b"{}")
            if not isinstance(payload, dict):
                raise _BadRequest("request body must be a JSON object")
            reply = self._dispatch(capability, payload)
        except (_BadRequest, KeyError, TypeError, ValueError) as exc:
            self._send(req, 400, {"error": str(exc)})
            return
        self._send(req, 200, reply)

    def _send(self, req: BaseHTTPRequestHandler, status: int, body: dict):
        data = json.dumps(body).encode("utf-8")
        try:
            req.send_response(status)
            req.send_header("Content-Type", "application/json")
            req.send_header("Content-Length", str(len(data)))
            req.end_headers()
            req.wfile.write(data)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _decode_image(self, payload: dict):
        pixels = image_from_png_b64(payload["image_png_b64"])
        h, w = pixels.shape[:2]
        if (w, h) != (self.oracle.gt.width, self.oracle.gt.height):
            raise _BadRequest(
                f"image is {w}x{h} but this server is configured for "
                f"{self.oracle.gt.width}x{self.oracle.gt.height}"
            )
        return pixels

    def _dispatch(self, capability: str, payload: dict) -> dict:
        if capability == PROBABILITY_MAP:
            self._decode_image(payload)
            names = payload["classes"]
            if not isinstance(names, list) or not names:
                raise _BadRequest("classes must be a non-empty list")
            prompts = ClassPrompts(names=tuple(str(n) for n in names))
            long_side = int(payload["long_side"])
            maps = self.oracle.probability_maps(None, prompts, long_side)
            return {
                "width": maps[0].width,
                "height": maps[0].height,
                "maps": [values_to_b64(m) for m in maps],
            }
        if capability == MASK_PROPOSALS:
            self._decode_image(payload)
            masks = self.oracle.mask_proposals(None, int(payload["grid_n"]))
            return {"masks": [mask_to_png_b64(m) for m in masks]}
        if capability == SEGMENT:
            self._decode_image(payload)
            clicks = ClickSet(
                positives=tuple((int(x), int(y)) for x, y in payload.get("positive", [])),
                negatives=tuple((int(x), int(y)) for x, y in payload.get("negative", [])),
            )
            return {"mask_png_b64": mask_to_png_b64(self.oracle.segment(None, clicks))}
        if capability == CLICK_SUGGEST:
            self._decode_image(payload)
            raw = self.oracle.suggest(None, str(payload["question"]), int(payload["max_clicks"]))
            return {"raw_text": raw}
        raise _BadRequest(f"unhandled capability {capability}")
