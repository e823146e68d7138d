"""The HTTP+JSON service.

Endpoints:
  GET  /health                        -> model names, dims, checkpoint hash
  POST /embed_image {image}           -> {vector: 768 floats}
  POST /score {prompt, image}         -> {score: float in [-1, 1]}
  POST /refine {genome, prompt, steps} -> {genome}

Images travel as base64-encoded binary PPM (P6).  Every POST body must
carry a request_id, which is echoed in the response.  Malformed input is
a 400 with an error body; a missing model is a 503.  The service itself
is stateless between requests.
"""

from __future__ import annotations

import argparse
import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .backends import load_backend
from .ppm import ppm_from_bytes


class BadRequest(ValueError):
    pass


def _decode_image(doc: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(doc["image"].encode("ascii"), validate=True)
        return ppm_from_bytes(raw)
    except KeyError:
        raise BadRequest("missing field: image") from None
    except (ValueError, AttributeError) as err:
        raise BadRequest(f"malformed image: {err}") from None


def _require(doc: dict, field: str):
    try:
        return doc[field]
    except KeyError:
        raise BadRequest(f"missing field: {field}") from None


class SidecarService:
    """Request handling, separated from HTTP plumbing for in-process tests."""

    def __init__(self, backend):
        self.backend = backend

    def health(self) -> dict:
        if self.backend is None:
            return {"status": "no-model", "models": {}, "dims": {}}
        return {
            "status": "ok",
            "models": self.backend.health_info(),
            "dims": {"embedding": self.backend.embed_dim},
            "codebook_size": self.backend.codebook_size,
            "genome_length": self.backend.genome_length,
            "checkpoint_hash": self.backend.checkpoint_hash(),
        }

    def handle(self, endpoint: str, doc: dict) -> dict:
        if self.backend is None:
            raise ModelNotLoaded()
        request_id = _require(doc, "request_id")
        if endpoint == "/embed_image":
            img = _decode_image(doc)
            vector = self.backend.embed_image(img)
            return {"request_id": request_id, "vector": [float(x) for x in vector]}
        if endpoint == "/score":
            prompt = _require(doc, "prompt")
            if not prompt:
                raise BadRequest("prompt must be nonempty")
            img = _decode_image(doc)
            return {"request_id": request_id, "score": float(self.backend.score(prompt, img))}
        if endpoint == "/refine":
            prompt = _require(doc, "prompt")
            steps = _require(doc, "steps")
            if not isinstance(steps, int) or steps < 0:
                raise BadRequest("steps must be a non-negative integer")
            try:
                genome = np.asarray(_require(doc, "genome"), dtype=np.int64)
                self.backend.validate_genome(genome)
            except (TypeError, ValueError) as err:
                raise BadRequest(f"invalid genome: {err}") from None
            out = self.backend.refine(genome, prompt, steps)
            return {"request_id": request_id, "genome": [int(v) for v in out]}
        raise BadRequest(f"unknown endpoint {endpoint}")


class ModelNotLoaded(RuntimeError):
    pass


class _Handler(BaseHTTPRequestHandler):
    service: SidecarService = None  # assigned by make_server

    def log_message(self, *args):  # quiet by default
        pass

    def _send(self, code: int, doc: dict):
        body = json.dumps(doc).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/health":
            self._send(200, self.service.health())
        else:
            self._send(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):
        try:
            length = int(self.headers.get("Content-Length", "0"))
            doc = json.loads(self.rfile.read(length))
            if not isinstance(doc, dict):
                raise BadRequest("body must be a JSON object")
            self._send(200, self.service.handle(self.path, doc))
        except BadRequest as err:
            self._send(400, {"error": str(err)})
        except ModelNotLoaded:
            self._send(503, {"error": "model not loaded"})
        except json.JSONDecodeError:
            self._send(400, {"error": "body is not valid JSON"})
        except Exception as err:  # keep the service alive
            self._send(500, {"error": f"{type(err).__name__}: {err}"})


def make_server(service: SidecarService, port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_background(service: SidecarService, port: int = 0):
    """Start a server thread; returns (server, base_url).  Test helper."""
    server = make_server(service, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, bound_port = server.server_address
    return server, f"http://{host}:{bound_port}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qdforge-sidecar")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--backend", default="stub", help="stub, or torch with the model extra")
    parser.add_argument("--grid", type=int, default=24)
    parser.add_argument("--block", type=int, default=16)
    parser.add_argument("--codebook-size", type=int, default=16384)
    parser.add_argument("--normalize", action="store_true", help="L2-normalize image embeddings")
    args = parser.parse_args(argv)
    backend = load_backend(
        args.backend,
        grid=args.grid,
        block=args.block,
        codebook_size=args.codebook_size,
        normalize=args.normalize,
    )
    service = SidecarService(backend)
    server = make_server(service, args.port)
    host, port = server.server_address
    print(f"qdforge-sidecar ({backend.name}) listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
