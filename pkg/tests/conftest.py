import numpy as np
import pytest

from qdforge.core import Individual, derive_stream, desk_config
from qdforge.decoder import generate_codebook, init_genome_fractal
from qdforge.evaluation import EvalContext
from qdforge.imagemetrics import HsvSummary


@pytest.fixture(scope="session")
def desk_cfg():
    return desk_config(master_seed=7)


@pytest.fixture(scope="session")
def desk_book(desk_cfg):
    return generate_codebook(desk_cfg, derive_stream(desk_cfg.master_seed, "codebook"))


@pytest.fixture()
def desk_ctx(desk_cfg, desk_book):
    return EvalContext(cfg=desk_cfg, book=desk_book)


def random_image(gen: np.random.Generator, h: int = 8, w: int = 8) -> np.ndarray:
    return gen.random((h, w, 3))


def random_summary(gen: np.random.Generator) -> HsvSummary:
    return HsvSummary(
        mean_h=float(gen.random()),
        std_h=float(gen.random() * 0.5),
        mean_s=float(gen.random()),
        std_s=float(gen.random() * 0.5),
        mean_b=float(gen.random()),
        std_b=float(gen.random() * 0.5),
        n_pixels=64,
    )


def stub_individual(gen: np.random.Generator, embed_dim: int = 4) -> Individual:
    """An individual with measurement caches only (no genome semantics)."""
    ind = Individual(genome=np.zeros(1, dtype=np.int64))
    ind.fitness = float(gen.random())
    ind.hsv = random_summary(gen)
    ind.embedding = gen.random(embed_dim)
    return ind


def make_population(cfg, book, ctx, prompt, n, seed_label="init"):
    gen = derive_stream(cfg.master_seed, seed_label).generator()
    pop = [Individual(genome=init_genome_fractal(cfg, gen)) for _ in range(n)]
    ctx.evaluate_population(pop, prompt)
    return pop
