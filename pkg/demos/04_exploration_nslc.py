"""One exploration cycle: novelty search with local competition.

Every generation mutates each member, pools parents with offspring, and
selects by non-dominated sorting on two maximized objectives: novelty
(mean distance to the k nearest neighbors among pool and archive) and
local competition (fraction of those neighbors beaten on fitness).
Diversity rises while fitness is spent.
"""

import numpy as np

from qdforge import (
    DistanceMetricKind,
    NoveltyArchive,
    NoveltyParams,
    derive_stream,
    desk_config,
    generate_codebook,
    init_genome_fractal,
    nslc_generation,
    population_diversity,
)
from qdforge.core import Individual
from qdforge.evaluation import EvalContext
from qdforge.evolve import objective_pairs
from qdforge.refine import RefineParams, refine_population

cfg = desk_config(master_seed=7)
book = generate_codebook(cfg, derive_stream(cfg.master_seed, "codebook"))
ctx = EvalContext(cfg=cfg, book=book)
prompt = ctx.oracle.prompt_vector("SP3")

gen = derive_stream(cfg.master_seed, "init").generator()
pop = [Individual(genome=init_genome_fractal(cfg, gen)) for _ in range(50)]
ctx.evaluate_population(pop, prompt)

# refine first so the population has converged (colors pulled toward the prompt)
rng_refine = derive_stream(cfg.master_seed, "refine").generator()
pop, rows = refine_population(pop, prompt, 10, RefineParams(), ctx, rng_refine)
pre = rows[-1]
print(f"after 10 refinement iterations: mean fitness {pre.mean_fitness:+.5f}, "
      f"hsv diversity {pre.mean_hsv_diversity:.6f}")

params = NoveltyParams(metric=DistanceMetricKind.HSV)
print(f"NSLC parameters: k={params.k} neighbors, e={params.e} archived per generation, "
      f"mutation resamples {params.mutation_rate:.0%} of genes")

archive = NoveltyArchive()
rng = derive_stream(cfg.master_seed, "mutation").generator()
print("\ngen  mean_fitness  hsv_diversity  archive")
for g in range(1, 11):
    pop, archive = nslc_generation(pop, archive, params, prompt, ctx, rng)
    fit = np.mean([i.fitness for i in pop])
    div = population_diversity(pop, DistanceMetricKind.HSV, 15)
    print(f"{g:3d}  {fit:+.5f}      {div:.6f}   {len(archive)}")

pairs = objective_pairs(pop, archive, params)
best_novelty = max(pairs, key=lambda p: p.novelty)
print(f"\nmost novel survivor: novelty={best_novelty.novelty:.6f}, "
      f"local competition={best_novelty.local_competition:.2f} "
      f"(multiple of 1/{params.k})")
print("fitness was traded for diversity; the next refinement cycle would win it back")
