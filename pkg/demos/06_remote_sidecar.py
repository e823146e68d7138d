"""The remote bridge: scoring and refining through a sidecar service.

Starts the stub sidecar in-process (install it from ./sidecar first),
then drives the engine's remote client against it: health check, image
embedding, scoring, and a few remote refinement steps.  Pointing
QDFORGE_SIDECAR_URL at a sidecar wrapping real pretrained models uses the
exact same wire protocol.
"""

import numpy as np

from qdforge import derive_stream, desk_config, generate_codebook, init_genome_fractal
from qdforge.decoder import decode
from qdforge.sidecar_client import SidecarClient

try:
    from qdforge_sidecar import SidecarService, StubBackend, serve_background
except ImportError:
    raise SystemExit("install the sidecar first:  pip install -e ./sidecar")

cfg = desk_config(master_seed=7)
backend = StubBackend(grid=cfg.grid_w, block=cfg.block_px, codebook_size=cfg.codebook_size)
server, url = serve_background(SidecarService(backend))
print(f"stub sidecar listening at {url}")

client = SidecarClient(url)
health = client.health()
print(f"health: status={health['status']}, models={health['models']}, "
      f"embedding dim {health['dims']['embedding']}")

book = generate_codebook(cfg, derive_stream(cfg.master_seed, "codebook"))
genome = init_genome_fractal(cfg, derive_stream(cfg.master_seed, "init"))
img = decode(genome, book, cfg)

vec = client.embed_image(img)
print(f"/embed_image -> vector of {vec.shape[0]} floats, |v| = {np.linalg.norm(vec):.3f}")

prompt = "a pyramid made of ice"
print(f"/score {prompt!r} -> {client.score(prompt, img):+.5f}")

before = backend.score(prompt, backend.decode(genome))
refined = client.refine(genome, prompt, steps=25)
after = backend.score(prompt, backend.decode(refined))
print(f"/refine 25 steps: backend score {before:+.5f} -> {after:+.5f} "
      f"({int((refined != genome).sum())} genes changed)")

server.shutdown()
print("server stopped")
