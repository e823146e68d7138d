"""Shared evaluation context: config + codebook + backends + eval counters.

One EvalContext is built per run and threaded through refinement and
exploration.  It owns the oracle (synthetic or remote), the image
embedding backend for diversity measurement, and the budget counters that
make the total number of evaluations auditable against the schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import EngineConfig, Individual
from .decoder import Codebook, decode
from .imagemetrics import hsv_summary, synthetic_embedding
from .oracle import PromptVector, SyntheticOracle


def new_counters() -> dict:
    return {"full_scores": 0, "candidate_scores": 0}


@dataclass
class EvalContext:
    cfg: EngineConfig
    book: Codebook
    oracle: object = field(default_factory=SyntheticOracle)
    embed_backend: str = "synthetic"  # or "remote"
    client: Optional[object] = None
    counters: dict = field(default_factory=new_counters)
    scorer_cache: dict = field(default_factory=dict)

    def embed_image(self, img: np.ndarray) -> np.ndarray:
        if self.embed_backend == "remote":
            return self.client.embed_image(img)
        return synthetic_embedding(img)

    def score_image(self, img: np.ndarray, prompt: PromptVector) -> float:
        self.counters["full_scores"] += 1
        return self.oracle.score_image(img, prompt)

    def evaluate(self, ind: Individual, prompt: PromptVector) -> Individual:
        """Fill every cache the pipeline consumes (idempotent)."""
        if ind.phenotype is None:
            ind.phenotype = decode(ind.genome, self.book, self.cfg)
        if ind.fitness is None:
            ind.fitness = self.score_image(ind.phenotype, prompt)
        self.refresh_measures(ind)
        return ind

    def refresh_measures(self, ind: Individual) -> Individual:
        """Recompute hsv/embedding caches from the phenotype if stale."""
        if ind.hsv is None:
            ind.hsv = hsv_summary(ind.phenotype)
        if ind.embedding is None:
            ind.embedding = self.embed_image(ind.phenotype)
        return ind

    def evaluate_population(self, pop, prompt: PromptVector):
        for ind in pop:
            self.evaluate(ind, prompt)
        return pop
