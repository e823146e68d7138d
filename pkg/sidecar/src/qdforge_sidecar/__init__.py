"""qdforge-sidecar: HTTP+JSON bridge to perceptual models for qdforge."""

from .backends import StubBackend, load_backend
from .service import SidecarService, make_server, serve_background

__version__ = "0.1.0"
