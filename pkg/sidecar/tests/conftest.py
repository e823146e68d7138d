import json
import pathlib
import urllib.request

import pytest

from qdforge_sidecar.backends import StubBackend
from qdforge_sidecar.service import SidecarService, serve_background

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "golden.json"


@pytest.fixture(scope="session")
def golden():
    return json.loads(FIXTURES.read_text())


@pytest.fixture(scope="session")
def live_server(golden):
    backend = StubBackend(**golden["backend_config"])
    server, url = serve_background(SidecarService(backend))
    yield url
    server.shutdown()


def http_json(url, method="GET", payload=None):
    data = None
    headers = {}
    if payload is not None:
        data = json.dumps(payload).encode("utf-8")
        headers["Content-Type"] = "application/json"
    req = urllib.request.Request(url, data=data, headers=headers, method=method)
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())
