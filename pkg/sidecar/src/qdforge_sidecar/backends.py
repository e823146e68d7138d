"""Model backends behind the wire protocol.

The stub backend is a self-contained deterministic model family: a box
filter thumbnail as the image embedding, a hash-seeded unit vector as the
text embedding, cosine similarity as the score, and a greedy accept-if-
better mutation walk as the refiner.  It exists so the full protocol is
exercisable and testable with no model downloads.  Real pretrained models
(CLIP towers, a truncated ViT, a VQGAN) plug in behind the same interface
via load_backend("torch", ...) when the optional model stack and weight
paths are available.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

EMBED_GRID = 16
EMBED_DIM = EMBED_GRID * EMBED_GRID * 3


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def box_weights(src: int, dst: int = EMBED_GRID) -> np.ndarray:
    w = np.zeros((dst, src))
    scale = src / dst
    for i in range(dst):
        lo, hi = i * scale, (i + 1) * scale
        j = np.arange(src)
        overlap = np.minimum(hi, j + 1.0) - np.maximum(lo, j.astype(np.float64))
        w[i] = np.maximum(overlap, 0.0) / scale
    return w


@dataclass
class StubBackend:
    """Deterministic stand-in models with a tiny procedural generator."""

    grid: int = 24
    block: int = 16
    codebook_size: int = 16384
    normalize: bool = False

    name = "stub"
    embed_dim = EMBED_DIM

    @property
    def genome_length(self) -> int:
        return self.grid * self.grid

    def embed_image(self, img: np.ndarray) -> np.ndarray:
        wr = box_weights(img.shape[0])
        wc = box_weights(img.shape[1])
        thumb = np.stack([(wr @ img[:, :, c]) @ wc.T for c in range(3)], axis=-1)
        vec = thumb.reshape(-1)
        if self.normalize:
            norm = np.sqrt((vec**2).sum())
            if norm > 0:
                vec = vec / norm
        return vec

    def embed_text(self, text: str) -> np.ndarray:
        seed = np.random.SeedSequence([fnv1a_64(text.encode("utf-8")), 0x51DE])
        vec = np.random.Generator(np.random.PCG64(seed)).standard_normal(EMBED_DIM)
        return vec / np.sqrt((vec**2).sum())

    def score(self, text: str, img: np.ndarray) -> float:
        u = self.embed_image(img)
        v = self.embed_text(text)
        nu = np.sqrt((u**2).sum())
        nv = np.sqrt((v**2).sum())
        if nu == 0.0:
            return 0.0  # degenerate all-black image; stay total
        return float(np.clip((u * v).sum() / (nu * nv), -1.0, 1.0))

    def _entry_color(self, v: np.ndarray) -> np.ndarray:
        """Solid color per codebook index (fixed procedural palette)."""
        hue = (v * 0.6180339887498949) % 1.0
        val = 0.25 + 0.75 * ((v * 0.3819660112501051) % 1.0)
        sat = np.full_like(hue, 0.75)
        i = np.floor(hue * 6.0).astype(np.int64) % 6
        f = hue * 6.0 - np.floor(hue * 6.0)
        p = val * (1 - sat)
        q = val * (1 - sat * f)
        t = val * (1 - sat * (1 - f))
        r = np.choose(i, [val, q, p, p, t, val])
        g = np.choose(i, [t, val, val, q, p, p])
        b = np.choose(i, [p, p, t, val, val, q])
        return np.stack([r, g, b], axis=-1)

    def decode(self, genome: np.ndarray) -> np.ndarray:
        colors = self._entry_color(genome.astype(np.float64)).reshape(self.grid, self.grid, 3)
        img = np.repeat(np.repeat(colors, self.block, axis=0), self.block, axis=1)
        return img

    def validate_genome(self, genome: np.ndarray) -> None:
        if genome.ndim != 1 or genome.shape[0] != self.genome_length:
            raise ValueError(f"genome must have length {self.genome_length}")
        if genome.min(initial=0) < 0 or genome.max(initial=0) >= self.codebook_size:
            raise ValueError(f"genome values must lie in [0, {self.codebook_size})")

    def refine(self, genome: np.ndarray, text: str, steps: int) -> np.ndarray:
        """Greedy mutation walk on the stub score; best effort, not monotone
        by contract (this implementation happens to be monotone)."""
        self.validate_genome(genome)
        if steps == 0:
            return genome.copy()
        seed = np.random.SeedSequence(
            [fnv1a_64(text.encode("utf-8")), fnv1a_64(genome.tobytes()), steps]
        )
        rng = np.random.Generator(np.random.PCG64(seed))
        current = genome.copy()
        best = self.score(text, self.decode(current))
        for _ in range(steps):
            pos = int(rng.integers(0, self.genome_length))
            value = int(rng.integers(0, self.codebook_size))
            candidate = current.copy()
            candidate[pos] = value
            trial = self.score(text, self.decode(candidate))
            if trial > best:
                best = trial
                current = candidate
        return current

    def checkpoint_hash(self) -> str:
        tag = f"stub:{self.grid}:{self.block}:{self.codebook_size}:{int(self.normalize)}"
        return hashlib.sha256(tag.encode("ascii")).hexdigest()[:16]

    def health_info(self) -> dict:
        return {
            "image_embedder": "stub-boxfilter-16x16",
            "text_embedder": "stub-fnv-gaussian",
            "generator": f"stub-palette-grid{self.grid}-block{self.block}",
        }


def load_backend(name: str, **kwargs):
    """Backend factory.  "stub" is always available; "torch" is the seam
    for real pretrained towers (CLIP text/image, truncated ViT, VQGAN) and
    needs the optional model stack plus weight paths from the environment."""
    if name == "stub":
        return StubBackend(**kwargs)
    if name == "torch":
        raise RuntimeError(
            "the torch backend needs the optional model stack: install "
            "qdforge-sidecar[models], provide checkpoint paths via "
            "QDFORGE_SIDECAR_CLIP_WEIGHTS / QDFORGE_SIDECAR_VIT_WEIGHTS / "
            "QDFORGE_SIDECAR_VQGAN_WEIGHTS, and register the backend here"
        )
    raise ValueError(f"unknown backend {name!r}; available: stub, torch")
