"""Fitness scoring and the greedy refinement cycle.

Fitness is the cosine between an image embedding and a per-prompt target
direction.  Refinement climbs it by trying candidate codebook indices at
sampled gene positions, keeping only strict improvements, so the fitness
trace never decreases.
"""

import numpy as np

from qdforge import derive_stream, desk_config, generate_codebook, init_genome_fractal
from qdforge.core import Individual
from qdforge.evaluation import EvalContext
from qdforge.refine import RefineParams, refine_population

cfg = desk_config(master_seed=7)
book = generate_codebook(cfg, derive_stream(cfg.master_seed, "codebook"))
ctx = EvalContext(cfg=cfg, book=book)
prompt = ctx.oracle.prompt_vector("SP2")
print(f"prompt SP2 = {prompt.prompt_text!r}, target is a fixed 768-d unit vector")

gen = derive_stream(cfg.master_seed, "init").generator()
pop = [Individual(genome=init_genome_fractal(cfg, gen)) for _ in range(20)]
ctx.evaluate_population(pop, prompt)
print(f"initial mean fitness: {np.mean([i.fitness for i in pop]):+.4f}")

rng = derive_stream(cfg.master_seed, "refine").generator()
pop, rows = refine_population(pop, prompt, 30, RefineParams(), ctx, rng)

print("\niter  mean_fitness   hsv_diversity")
for row in rows[::5] + [rows[-1]]:
    print(f"{row.refine_iteration:4d}  {row.mean_fitness:+.5f}      {row.mean_hsv_diversity:.6f}")

deltas = [b.mean_fitness - a.mean_fitness for a, b in zip(rows, rows[1:])]
print(f"\nsmallest per-iteration change: {min(deltas):+.2e} (never negative)")
print(f"candidate evaluations spent: {ctx.counters['candidate_scores']} "
      f"(= 30 iters x 20 individuals x 8 positions x 16 candidates)")
