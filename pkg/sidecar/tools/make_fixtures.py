"""Regenerate the golden protocol fixtures from the stub backend.

Run from the sidecar directory:  python tools/make_fixtures.py
Writes fixtures/golden.json here and mirrors it into the engine's test
tree (../tests/fixtures/sidecar_golden.json) so both suites check the
same frozen bytes.
"""

import base64
import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from qdforge_sidecar.backends import StubBackend  # noqa: E402
from qdforge_sidecar.ppm import ppm_bytes  # noqa: E402
from qdforge_sidecar.service import SidecarService  # noqa: E402

BACKEND_CONFIG = {"grid": 4, "block": 4, "codebook_size": 64, "normalize": False}


def fixture_image() -> np.ndarray:
    img = np.zeros((4, 4, 3))
    img[:2, :2] = [1.0, 0.0, 0.0]
    img[:2, 2:] = [0.0, 1.0, 0.0]
    img[2:, :2] = [0.0, 0.0, 1.0]
    img[2:, 2:] = [1.0, 1.0, 1.0]
    return img


def fixture_genome():
    return [(3 * i) % 64 for i in range(16)]


def main() -> None:
    backend = StubBackend(**BACKEND_CONFIG)
    service = SidecarService(backend)
    image_b64 = base64.b64encode(ppm_bytes(fixture_image())).decode("ascii")
    prompt = "a pyramid made of ice"
    genome = fixture_genome()

    cases = []
    requests = [
        ("/embed_image", {"request_id": "fix-embed-1", "image": image_b64}),
        ("/score", {"request_id": "fix-score-1", "prompt": prompt, "image": image_b64}),
        (
            "/refine",
            {"request_id": "fix-refine-0", "prompt": prompt, "genome": genome, "steps": 0},
        ),
        (
            "/refine",
            {"request_id": "fix-refine-5", "prompt": prompt, "genome": genome, "steps": 5},
        ),
    ]
    for endpoint, request in requests:
        response = service.handle(endpoint, request)
        cases.append({"endpoint": endpoint, "request": request, "response": response})

    doc = {
        "backend_config": BACKEND_CONFIG,
        "float_tolerance": 1e-6,
        "cases": cases,
    }
    here = pathlib.Path(__file__).resolve().parents[1]
    targets = [
        here / "fixtures" / "golden.json",
        here.parent / "tests" / "fixtures" / "sidecar_golden.json",
    ]
    for target in targets:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(doc, indent=1) + "\n")
        print(f"wrote {target}")


if __name__ == "__main__":
    main()
