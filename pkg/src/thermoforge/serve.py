"""HTTP JSON inference service backing the latent-space explorer.

Stateless endpoints over read-only checkpoints: /meta, /decode, /predict,
/interpolate, /samples. Responses are canonically serialized (sorted keys,
fixed separators) so identical requests always yield identical bytes, and
binary payloads travel as base64 little-endian blobs.
"""

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from .deeponet import DeepONetModel, TrunkCache
from .geomgen import pack_raster
from .metrics import binarize, structural_consistency
from .vrrae import GenerativeModel


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


class BadRequest(Exception):
    pass


class InferenceService:
    """Pure request -> payload logic, reusable without a socket."""

    def __init__(self, encoder: GenerativeModel, surrogate: DeepONetModel,
                 reference_range: tuple[float, float], test_rasters: np.ndarray):
        self.encoder = encoder
        self.surrogate = surrogate
        self.reference_range = (float(reference_range[0]), float(reference_range[1]))
        self.test_rasters = test_rasters
        self.cache: TrunkCache = surrogate.build_trunk_cache()
        self.grid = encoder.grid

    def _check_alpha(self, raw, name="alpha") -> np.ndarray:
        if not isinstance(raw, (list, tuple)) or len(raw) != self.encoder.k_star:
            raise BadRequest(f"{name} must be a list of {self.encoder.k_star} numbers")
        try:
            alpha = np.asarray(raw, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise BadRequest(f"{name} is not numeric: {exc}") from exc
        if not np.isfinite(alpha).all():
            raise BadRequest(f"{name} contains non-finite entries")
        return alpha

    def meta(self) -> dict:
        stats = {k: [float(x) for x in v] for k, v in (self.encoder.stats or {}).items()}
        return {
            "k_star": self.encoder.k_star,
            "grid": list(self.grid),
            "mode": self.encoder.mode,
            "stats": stats,
            "target_field": self.surrogate.target_field,
            "reference_range": list(self.reference_range),
        }

    def decode(self, body: dict) -> dict:
        alpha = self._check_alpha(body.get("alpha"))
        soft = self.encoder.decode(alpha)
        raster = binarize(soft)
        validity = structural_consistency(raster, self.reference_range)
        report = validity.to_dict()
        report["reference_range"] = list(report["reference_range"])
        return {
            "alpha": [float(a) for a in alpha],
            "raster": base64.b64encode(pack_raster(raster)).decode(),
            "grid": list(self.grid),
            "validity": report,
        }

    def predict(self, body: dict) -> dict:
        alpha = self._check_alpha(body.get("alpha"))
        field = self.surrogate.predict_field(alpha, self.cache).astype("<f4")
        return {
            "alpha": [float(a) for a in alpha],
            "field": base64.b64encode(field.tobytes()).decode(),
            "grid": list(self.grid),
            "min": float(field.min()),
            "max": float(field.max()),
        }

    def interpolate(self, body: dict) -> dict:
        a = self._check_alpha(body.get("alpha_a"), "alpha_a")
        b = self._check_alpha(body.get("alpha_b"), "alpha_b")
        t = body.get("t")
        if not isinstance(t, (int, float)) or not 0.0 <= float(t) <= 1.0:
            raise BadRequest("t must be a number in [0, 1]")
        alpha = (1.0 - float(t)) * a + float(t) * b
        payload = {"alpha": [float(x) for x in alpha], "t": float(t)}
        payload["decode"] = self.decode({"alpha": list(alpha)})
        payload["predict"] = self.predict({"alpha": list(alpha)})
        return payload

    def samples(self, n: int, seed: int) -> dict:
        if n < 1:
            raise BadRequest("n must be >= 1")
        n = min(n, len(self.test_rasters))
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(self.test_rasters), size=n, replace=False))
        codes = self.encoder.project_batch(self.test_rasters[idx])
        return {
            "indices": [int(i) for i in idx],
            "codes": [[float(x) for x in row] for row in codes],
        }

    def handle(self, method: str, path: str, body: bytes) -> tuple[int, dict]:
        url = urlparse(path)
        try:
            if method == "GET" and url.path == "/meta":
                return 200, self.meta()
            if method == "GET" and url.path == "/samples":
                q = parse_qs(url.query)
                n = int(q.get("n", ["8"])[0])
                seed = int(q.get("seed", ["0"])[0])
                return 200, self.samples(n, seed)
            if method == "POST" and url.path in ("/decode", "/predict", "/interpolate"):
                try:
                    payload = json.loads(body or b"{}")
                except json.JSONDecodeError as exc:
                    raise BadRequest(f"malformed JSON body: {exc}") from exc
                fn = {"/decode": self.decode, "/predict": self.predict,
                      "/interpolate": self.interpolate}[url.path]
                return 200, fn(payload)
            return 404, {"error": f"no such endpoint: {method} {url.path}"}
        except BadRequest as exc:
            return 400, {"error": str(exc)}


class _Handler(BaseHTTPRequestHandler):
    service: InferenceService | None = None

    def _respond(self, status: int, payload: dict):
        body = canonical_json(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _dispatch(self, method):
        if self.service is None:
            self._respond(503, {"error": "checkpoints still loading"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, payload = self.service.handle(method, self.path, body)
        self._respond(status, payload)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def log_message(self, fmt, *args):  # stay quiet under test
        pass


def make_server(service: InferenceService, host: str, port: int) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: InferenceService, host: str, port: int):
    server = make_server(service, host, port)
    print(f"serving on http://{host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


def start_background(service: InferenceService, host: str = "127.0.0.1", port: int = 0):
    """Server on a daemon thread; returns (server, base_url). Test helper."""
    server = make_server(service, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://{host}:{server.server_address[1]}"
