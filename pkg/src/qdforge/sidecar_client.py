"""Client for the sidecar wire protocol (HTTP + JSON).

Images travel as base64-encoded binary PPM (P6) bytes; vectors and
genomes as JSON number arrays.  Every request carries a request_id that
the service must echo back, which catches crossed responses early.  A
connection-level failure raises SidecarUnavailable so callers can
distinguish "service down" from "service rejected the request".
"""

from __future__ import annotations

import base64
import itertools
import json
import urllib.error
import urllib.request

import numpy as np

from .decoder import ppm_bytes, ppm_from_bytes

__all__ = ["SidecarError", "SidecarUnavailable", "SidecarClient", "encode_image", "decode_image"]


class SidecarError(RuntimeError):
    pass


class SidecarUnavailable(SidecarError):
    pass


def encode_image(img: np.ndarray) -> str:
    return base64.b64encode(ppm_bytes(img)).decode("ascii")


def decode_image(payload: str) -> np.ndarray:
    return ppm_from_bytes(base64.b64decode(payload.encode("ascii")))


class SidecarClient:
    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._request_ids = itertools.count(1)

    def _request(self, method: str, endpoint: str, payload=None) -> dict:
        url = f"{self.base_url}{endpoint}"
        data = None
        headers = {}
        if payload is not None:
            data = json.dumps(payload).encode("utf-8")
            headers["Content-Type"] = "application/json"
        req = urllib.request.Request(url, data=data, headers=headers, method=method)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read()
        except urllib.error.HTTPError as err:
            detail = err.read().decode("utf-8", "replace")
            raise SidecarError(f"{endpoint} failed with HTTP {err.code}: {detail}") from err
        except (urllib.error.URLError, ConnectionError, TimeoutError, OSError) as err:
            raise SidecarUnavailable(f"sidecar unreachable at {self.base_url}: {err}") from err
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as err:
            raise SidecarError(f"{endpoint} returned malformed JSON") from err
        return doc

    def _post(self, endpoint: str, payload: dict) -> dict:
        request_id = f"q{next(self._request_ids)}"
        doc = self._request("POST", endpoint, {"request_id": request_id, **payload})
        if doc.get("request_id") != request_id:
            raise SidecarError(
                f"{endpoint} echoed request_id {doc.get('request_id')!r}, expected {request_id!r}"
            )
        return doc

    def health(self) -> dict:
        return self._request("GET", "/health")

    def embed_image(self, img: np.ndarray) -> np.ndarray:
        doc = self._post("/embed_image", {"image": encode_image(img)})
        vec = np.asarray(doc["vector"], dtype=np.float64)
        if not np.isfinite(vec).all():
            raise SidecarError("/embed_image returned non-finite values")
        return vec

    def score(self, prompt_text: str, img: np.ndarray) -> float:
        doc = self._post("/score", {"prompt": prompt_text, "image": encode_image(img)})
        value = float(doc["score"])
        if not np.isfinite(value) or not -1.0 <= value <= 1.0:
            raise SidecarError(f"/score returned {value}, outside [-1, 1]")
        return value

    def refine(self, genome: np.ndarray, prompt_text: str, steps: int) -> np.ndarray:
        doc = self._post(
            "/refine",
            {"genome": [int(g) for g in genome], "prompt": prompt_text, "steps": int(steps)},
        )
        out = np.asarray(doc["genome"], dtype=np.int64)
        if out.shape != np.asarray(genome).shape:
            raise SidecarError("/refine changed the genome length")
        return out
