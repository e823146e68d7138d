"""Fitness evaluation: prompt-vs-image similarity scores.

The fitness of an image is the cosine similarity between an image
embedding and a fixed target direction for the prompt.  The synthetic
backend is total and deterministic: the prompt target is a unit vector
seeded from an FNV-1a hash of the prompt text, and the image embedding is
the synthetic thumbnail-rotation embedding.  The remote backend scores
through a sidecar service speaking the wire protocol in
:mod:`qdforge.sidecar_client`.  Fitness is kept as a similarity to be
maximized throughout the engine; nothing ever negates it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import derive_stream, fnv1a_64
from .imagemetrics import EMBED_DIM, synthetic_embedding

__all__ = [
    "PromptVector",
    "PROMPT_PRESETS",
    "cosine_similarity",
    "embed_prompt_synthetic",
    "resolve_prompt_text",
    "score",
    "SyntheticOracle",
    "RemoteOracle",
]

# The five community prompts used by the experiments, as named presets.
PROMPT_PRESETS = {
    "SP1": "a lonely house in the woods",
    "SP2": "a pyramid made of ice",
    "SP3": "artificial intelligence",
    "SP4": "cosmic love and attention",
    "SP5": "fire in the sky",
}


@dataclass(frozen=True)
class PromptVector:
    """A prompt and its target direction in embedding space."""

    prompt_text: str
    target: np.ndarray

    def __post_init__(self):
        if not np.sqrt((self.target**2).sum()) > 0.0:
            raise ValueError("prompt target must have nonzero magnitude")


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """u.v / (|u||v|), clamped into [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.sqrt((u**2).sum())
    nv = np.sqrt((v**2).sum())
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero-magnitude vectors")
    return float(np.clip((u * v).sum() / (nu * nv), -1.0, 1.0))


def resolve_prompt_text(prompt: str) -> str:
    """Map a preset id (SP1..SP5) to its text; free text passes through."""
    return PROMPT_PRESETS.get(prompt, prompt)


def embed_prompt_synthetic(prompt: str) -> PromptVector:
    """Deterministic unit target vector for a prompt.

    The stream is seeded from the FNV-1a 64 hash of the UTF-8 prompt text,
    so the same prompt maps to the same direction on every platform.
    """
    if not prompt:
        raise ValueError("prompt must be nonempty")
    text = resolve_prompt_text(prompt)
    gen = derive_stream(fnv1a_64(text.encode("utf-8")), "prompt-embedding").generator()
    vec = gen.standard_normal(EMBED_DIM)
    return PromptVector(prompt_text=text, target=vec / np.sqrt((vec**2).sum()))


def score(img: np.ndarray, prompt: PromptVector, provider=synthetic_embedding) -> float:
    """Fitness of an image: cosine of provider(img) against the prompt target."""
    return cosine_similarity(provider(img), prompt.target)


class SyntheticOracle:
    """Total, deterministic fitness backend (no network, no files)."""

    backend_name = "synthetic"

    def prompt_vector(self, prompt: str) -> PromptVector:
        return embed_prompt_synthetic(prompt)

    def score_image(self, img: np.ndarray, prompt: PromptVector) -> float:
        return score(img, prompt, synthetic_embedding)

    def score_population(self, imgs, prompt: PromptVector) -> list[float]:
        return [self.score_image(img, prompt) for img in imgs]


class RemoteOracle:
    """Fitness backend that scores through a sidecar service.

    The prompt target direction never materializes locally (the text
    encoder lives behind the wire), so the PromptVector target is a
    placeholder unit vector and scoring sends the prompt text itself.
    Population scoring keeps a bounded number of requests in flight.
    """

    backend_name = "remote"

    def __init__(self, client, max_in_flight: int = 4):
        self.client = client
        self.max_in_flight = max_in_flight

    def prompt_vector(self, prompt: str) -> PromptVector:
        text = resolve_prompt_text(prompt)
        placeholder = np.zeros(EMBED_DIM)
        placeholder[0] = 1.0
        return PromptVector(prompt_text=text, target=placeholder)

    def score_image(self, img: np.ndarray, prompt: PromptVector) -> float:
        return self.client.score(prompt.prompt_text, img)

    def score_population(self, imgs, prompt: PromptVector) -> list[float]:
        imgs = list(imgs)
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(lambda im: self.score_image(im, prompt), imgs))
