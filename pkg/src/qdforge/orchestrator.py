"""Full experiments: alternating refine/explore schedules, three variants.

A run starts from a shared fractal-noise population, refines greedily to
each interrupt, explores with NSLC for a fixed number of generations
(fresh archive per cycle), and finishes with a final refinement segment.
One metrics row is logged per refinement iteration and per exploration
generation.  Runs are deterministic for a given (variant, prompt, seed):
re-running reproduces the serialized log byte for byte, and a failed run
leaves a checkpoint from which the identical log can be completed.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    ConfigError,
    EngineConfig,
    Individual,
    derive_stream,
    ensure_valid,
    fnv1a_64,
    config_to_json,
)
from .decoder import decode, generate_codebook, init_genome_fractal, write_ppm
from .evaluation import EvalContext
from .evolve import ArchiveEntry, NoveltyArchive, NoveltyParams, nslc_generation
from .imagemetrics import DistanceMetricKind, HsvSummary, nearest_neighbor_distance
from .metrics import MetricsRow, RunMetrics, measure_population
from .oracle import SyntheticOracle
from .refine import RefineParams, refine_step

__all__ = [
    "CycleSchedule",
    "VariantSpec",
    "VARIANTS",
    "RunResult",
    "RunFailure",
    "desk_schedule",
    "full_schedule",
    "variant_from_name",
    "run_variant",
    "load_checkpoint",
    "compare_runs",
    "select_showcase",
    "sanitize_for_filename",
]


@dataclass(frozen=True)
class CycleSchedule:
    total_refine_iters: int = 600
    interrupt_at: tuple[int, ...] = (100, 200, 300, 400)
    nslc_generations: int = 50

    def validate(self) -> list[str]:
        problems = []
        if self.total_refine_iters < 0:
            problems.append("total_refine_iters must be >= 0")
        if any(t <= 0 for t in self.interrupt_at):
            problems.append("interrupts must be positive")
        if list(self.interrupt_at) != sorted(set(self.interrupt_at)):
            problems.append("interrupts must be strictly increasing")
        if any(t >= self.total_refine_iters for t in self.interrupt_at):
            problems.append("interrupts must fall before total_refine_iters")
        if self.nslc_generations < 1:
            problems.append("nslc_generations must be >= 1")
        return problems


def desk_schedule() -> CycleSchedule:
    return CycleSchedule(total_refine_iters=60, interrupt_at=(10, 20, 30, 40), nslc_generations=10)


def full_schedule() -> CycleSchedule:
    return CycleSchedule()


@dataclass(frozen=True)
class VariantSpec:
    name: str
    metric: Optional[DistanceMetricKind]


VARIANTS = {
    "GAN-BSL": VariantSpec("GAN-BSL", None),
    "NSLC-HSV": VariantSpec("NSLC-HSV", DistanceMetricKind.HSV),
    "NSLC-ViT": VariantSpec("NSLC-ViT", DistanceMetricKind.EMBEDDING),
}


def variant_from_name(name: str) -> VariantSpec:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ConfigError(
            [f"unknown variant {name!r}; valid names: {', '.join(sorted(VARIANTS))}"]
        ) from None


def sanitize_for_filename(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in text)


class RunFailure(RuntimeError):
    """A run failed mid-flight; ``checkpoint_path`` resumes it if set."""

    def __init__(self, checkpoint_path):
        self.checkpoint_path = checkpoint_path
        super().__init__(
            "run failed"
            + (f"; checkpoint preserved at {checkpoint_path}" if checkpoint_path else "")
        )


@dataclass
class RunResult:
    population: list[Individual]
    metrics: RunMetrics
    exported: list[str]
    counters: dict
    archive_sizes: list[int]
    checkpoint_path: Optional[str] = None


@dataclass
class _RunState:
    """Everything needed to continue a run from a row boundary."""

    population: list[Individual]
    rows: list[MetricsRow]
    rng: dict  # label -> np.random.Generator
    segment: int = 0
    refine_done: int = 0
    explore_done: int = 0
    in_explore: bool = False
    archive: Optional[NoveltyArchive] = None
    archive_sizes: list[int] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    boundary: Optional[dict] = None

    def mark_boundary(self) -> None:
        """Snapshot the row-consistent state; mid-row failures rewind here.

        Refine steps mutate individuals in place and RNG cursors advance
        inside a row, so the live state is unusable after a mid-row crash.
        """
        self.boundary = {
            "population": [(ind.genome.copy(), ind.fitness) for ind in self.population],
            "rng": {label: gen.bit_generator.state for label, gen in self.rng.items()},
            "cursor": {
                "segment": self.segment,
                "refine_done": self.refine_done,
                "explore_done": self.explore_done,
                "in_explore": self.in_explore,
            },
            "rows_len": len(self.rows),
            "archive": None if self.archive is None else list(self.archive.entries),
            "archive_sizes": list(self.archive_sizes),
            "counters": dict(self.counters),
        }


def _segments(schedule: CycleSchedule, interrupts: tuple[int, ...]):
    starts = (0,) + interrupts
    ends = interrupts + (schedule.total_refine_iters,)
    return list(zip(starts, ends))


def _export_population(pop, out_dir, variant, prompt_id, iteration) -> list[str]:
    order = np.argsort(-np.array([ind.fitness for ind in pop]), kind="stable")
    paths = []
    tag = sanitize_for_filename(prompt_id)
    for rank, i in enumerate(order):
        name = f"{variant}_{tag}_{iteration}_{rank:02d}.ppm"
        path = Path(out_dir) / name
        write_ppm(pop[int(i)].phenotype, path)
        paths.append(str(path))
    return paths


def _config_hash(cfg: EngineConfig) -> int:
    return fnv1a_64(config_to_json(cfg).encode("utf-8"))


def _save_checkpoint(path, cfg, variant, prompt_id, schedule, refine_params, novelty_params, state):
    boundary = state.boundary
    doc = {
        "kind": "qdforge-checkpoint",
        "config": {f.name: getattr(cfg, f.name) for f in fields(EngineConfig)},
        "config_hash": _config_hash(cfg),
        "variant": variant.name,
        "prompt_id": prompt_id,
        "schedule": asdict(schedule),
        "refine_params": asdict(refine_params),
        "novelty_params": {
            "k": novelty_params.k,
            "e": novelty_params.e,
            "generations": novelty_params.generations,
            "mutation_rate": novelty_params.mutation_rate,
        },
        "cursor": boundary["cursor"],
        "population": [
            {"genome": genome.tolist(), "fitness": fitness}
            for genome, fitness in boundary["population"]
        ],
        "archive": None
        if boundary["archive"] is None
        else [
            {"hsv": asdict(e.hsv), "embedding": e.embedding.tolist(), "fitness": e.fitness}
            for e in boundary["archive"]
        ],
        "rows": [asdict(r) for r in state.rows[: boundary["rows_len"]]],
        "rng": boundary["rng"],
        "counters": boundary["counters"],
        "archive_sizes": boundary["archive_sizes"],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return str(path)


def load_checkpoint(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "qdforge-checkpoint":
        raise ValueError(f"{path} is not a qdforge checkpoint")
    return doc


def _restore_state(doc, ctx, prompt) -> _RunState:
    population = []
    for entry in doc["population"]:
        ind = Individual(genome=np.asarray(entry["genome"], dtype=np.int64))
        ind.fitness = entry["fitness"]  # stored value wins over recompute paths
        ctx.evaluate(ind, prompt)
        population.append(ind)
    archive = None
    if doc["archive"] is not None:
        archive = NoveltyArchive(
            entries=[
                ArchiveEntry(
                    hsv=HsvSummary(**e["hsv"]),
                    embedding=np.asarray(e["embedding"], dtype=np.float64),
                    fitness=e["fitness"],
                )
                for e in doc["archive"]
            ]
        )
    rng = {}
    for label, bg_state in doc["rng"].items():
        gen = derive_stream(doc["config"]["master_seed"], label).generator()
        gen.bit_generator.state = bg_state
        rng[label] = gen
    cursor = doc["cursor"]
    return _RunState(
        population=population,
        rows=[MetricsRow(**r) for r in doc["rows"]],
        rng=rng,
        segment=cursor["segment"],
        refine_done=cursor["refine_done"],
        explore_done=cursor["explore_done"],
        in_explore=cursor["in_explore"],
        archive=archive,
        archive_sizes=list(doc["archive_sizes"]),
        counters=dict(doc["counters"]),
    )


def run_variant(
    variant,
    prompt_id: str,
    cfg: EngineConfig,
    schedule: CycleSchedule,
    *,
    refine_params: Optional[RefineParams] = None,
    novelty_params: Optional[NoveltyParams] = None,
    oracle=None,
    embed_backend: str = "synthetic",
    refine_backend: str = "local",
    client=None,
    out_dir=None,
    observer=None,
    timings: bool = False,
    resume_from=None,
) -> RunResult:
    """Run one experiment variant end to end.

    The initial population depends only on (cfg, seed), never on the
    variant, so all variants start from the same images.  On an exception
    mid-run a checkpoint lands in out_dir (if given) and the error is
    re-raised; passing that checkpoint as ``resume_from`` completes the
    run with a log identical to an uninterrupted one.

    refine_backend="remote" replaces the local coordinate-ascent step with
    one sidecar /refine call per individual per iteration; that path makes
    no monotonicity promise.
    """
    if isinstance(variant, str):
        variant = variant_from_name(variant)
    ensure_valid(cfg)
    problems = schedule.validate()
    if problems:
        raise ConfigError(problems)
    refine_params = refine_params or RefineParams()
    refine_params.validate(cfg.codebook_size)
    if novelty_params is None:
        novelty_params = NoveltyParams()
    if variant.metric is not None:
        novelty_params = NoveltyParams(
            k=novelty_params.k,
            e=novelty_params.e,
            generations=schedule.nslc_generations,
            mutation_rate=novelty_params.mutation_rate,
            metric=variant.metric,
        )
    oracle = oracle or SyntheticOracle()
    ctx = EvalContext(cfg=cfg, book=generate_codebook(cfg, derive_stream(cfg.master_seed, "codebook")),
                      oracle=oracle, embed_backend=embed_backend, client=client)
    prompt = oracle.prompt_vector(prompt_id)
    interrupts = () if variant.metric is None else tuple(schedule.interrupt_at)
    segments = _segments(schedule, interrupts)

    if resume_from is not None:
        doc = resume_from if isinstance(resume_from, dict) else load_checkpoint(resume_from)
        if doc["config_hash"] != _config_hash(cfg) or doc["variant"] != variant.name:
            raise ConfigError(["checkpoint does not match this run's config/variant"])
        state = _restore_state(doc, ctx, prompt)
        ctx.counters.update(state.counters)
    else:
        init_gen = derive_stream(cfg.master_seed, "init").generator()
        population = [
            Individual(genome=init_genome_fractal(cfg, init_gen))
            for _ in range(cfg.population_size)
        ]
        ctx.evaluate_population(population, prompt)
        state = _RunState(
            population=population,
            rows=[],
            rng={
                "init": init_gen,
                "refine": derive_stream(cfg.master_seed, "refine").generator(),
                "mutation": derive_stream(cfg.master_seed, "mutation").generator(),
            },
        )
    state.counters = ctx.counters
    state.mark_boundary()

    exported: list[str] = []
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)

    def notify(event, **payload):
        if observer is not None:
            observer(event, payload)

    try:
        for s in range(state.segment, len(segments)):
            seg_start, seg_end = segments[s]
            if not state.in_explore:
                for it in range(seg_start + state.refine_done + 1, seg_end + 1):
                    t0 = time.perf_counter()
                    for ind in state.population:
                        if refine_backend == "remote":
                            ind.genome = client.refine(ind.genome, prompt.prompt_text, steps=1)
                            ind.phenotype = decode(ind.genome, ctx.book, cfg)
                            ind.invalidate()
                            ind.fitness = ctx.score_image(ind.phenotype, prompt)
                        else:
                            refine_step(ind, prompt, refine_params, state.rng["refine"], ctx)
                        ctx.refresh_measures(ind)
                    row = measure_population(
                        state.population,
                        variant=variant.name,
                        prompt_id=prompt_id,
                        refine_iteration=it,
                        phase="refine",
                        wall_ms=(time.perf_counter() - t0) * 1e3,
                    )
                    state.rows.append(row)
                    state.refine_done = it - seg_start
                    state.mark_boundary()
                    notify("refine_iteration", row=row, population=state.population)
            if s < len(interrupts):
                if not state.in_explore:
                    if out_dir is not None:
                        exported.extend(
                            _export_population(state.population, out_dir, variant.name, prompt_id, seg_end)
                        )
                    notify("pre_explore", iteration=seg_end, population=state.population)
                    state.archive = NoveltyArchive()
                    state.in_explore = True
                    state.explore_done = 0
                for g in range(state.explore_done + 1, schedule.nslc_generations + 1):
                    t0 = time.perf_counter()
                    state.population, state.archive = nslc_generation(
                        state.population, state.archive, novelty_params, prompt, ctx, state.rng["mutation"]
                    )
                    row = measure_population(
                        state.population,
                        variant=variant.name,
                        prompt_id=prompt_id,
                        refine_iteration=seg_end,
                        phase="explore",
                        wall_ms=(time.perf_counter() - t0) * 1e3,
                    )
                    state.rows.append(row)
                    state.explore_done = g
                    state.mark_boundary()
                    notify("generation", row=row, population=state.population, archive=state.archive)
                state.archive_sizes.append(len(state.archive))
                notify("post_explore", iteration=seg_end, population=state.population)
                state.archive = None
                state.in_explore = False
            state.segment = s + 1
            state.refine_done = 0
            state.explore_done = 0
    except Exception as exc:
        checkpoint_path = None
        if out_dir is not None:
            checkpoint_path = _save_checkpoint(
                Path(out_dir) / "checkpoint.json",
                cfg, variant, prompt_id, schedule, refine_params, novelty_params, state,
            )
        raise RunFailure(checkpoint_path) from exc

    metrics = RunMetrics(rows=state.rows)
    if out_dir is not None:
        exported.extend(
            _export_population(
                state.population, out_dir, variant.name, prompt_id, schedule.total_refine_iters
            )
        )
        metrics.write_jsonl(Path(out_dir) / "metrics.jsonl", timings=timings)
        with open(Path(out_dir) / "population.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "config": {f.name: getattr(cfg, f.name) for f in fields(EngineConfig)},
                    "variant": variant.name,
                    "prompt_id": prompt_id,
                    "population": [
                        {"genome": ind.genome.tolist(), "fitness": ind.fitness}
                        for ind in state.population
                    ],
                },
                fh,
            )
    return RunResult(
        population=state.population,
        metrics=metrics,
        exported=exported,
        counters=dict(ctx.counters),
        archive_sizes=state.archive_sizes,
    )


@dataclass(frozen=True)
class CycleDelta:
    iteration: int
    fitness_ratio: float
    hsv_ratio: float
    vit_ratio: float


@dataclass(frozen=True)
class VariantSummary:
    variant: str
    prompt_id: str
    final_fitness: float
    final_hsv: float
    final_vit: float
    delta_fitness: float
    delta_hsv: float
    delta_vit: float
    cycles: tuple[CycleDelta, ...]


@dataclass(frozen=True)
class VariantAverage:
    variant: str
    n_prompts: int
    delta_fitness: float
    delta_hsv: float
    delta_vit: float


@dataclass
class RunComparison:
    baseline: str
    entries: list[VariantSummary]
    averages: list[VariantAverage]

    def table(self) -> str:
        header = (
            f"{'variant':<10} {'prompt':<22} {'fitness':>10} {'d_fit':>9} "
            f"{'hsv_div':>10} {'d_hsv':>9} {'vit_div':>10} {'d_vit':>9}"
        )
        lines = [f"baseline: {self.baseline}", header, "-" * len(header)]
        for e in self.entries:
            lines.append(
                f"{e.variant:<10} {e.prompt_id:<22} {e.final_fitness:>10.5f} {e.delta_fitness:>9.5f} "
                f"{e.final_hsv:>10.6f} {e.delta_hsv:>9.6f} {e.final_vit:>10.4f} {e.delta_vit:>9.4f}"
            )
            for c in e.cycles:
                lines.append(
                    f"  cycle @ {c.iteration}: fitness x{c.fitness_ratio:.4f}, "
                    f"hsv x{c.hsv_ratio:.4f}, vit x{c.vit_ratio:.4f}"
                )
        if any(a.n_prompts > 1 for a in self.averages):
            lines.append("-" * len(header))
            for a in self.averages:
                lines.append(
                    f"{a.variant:<10} {'avg over ' + str(a.n_prompts) + ' prompts':<22} "
                    f"{'':>10} {a.delta_fitness:>9.5f} {'':>10} {a.delta_hsv:>9.6f} "
                    f"{'':>10} {a.delta_vit:>9.4f}"
                )
        return "\n".join(lines)


def _cycle_deltas(log: RunMetrics) -> tuple[CycleDelta, ...]:
    refine_by_iter = {r.refine_iteration: r for r in log.refine_rows()}
    cycles = []
    explore = log.explore_rows()
    seen = []
    for row in explore:
        if row.refine_iteration not in seen:
            seen.append(row.refine_iteration)
    for t in seen:
        block = [r for r in explore if r.refine_iteration == t]
        pre = refine_by_iter[t]
        post = block[-1]
        cycles.append(
            CycleDelta(
                iteration=t,
                fitness_ratio=post.mean_fitness / pre.mean_fitness,
                hsv_ratio=post.mean_hsv_diversity / pre.mean_hsv_diversity,
                vit_ratio=post.mean_vit_diversity / pre.mean_vit_diversity,
            )
        )
    return tuple(cycles)


def compare_runs(logs: list[RunMetrics]) -> RunComparison:
    """Final-iteration deltas versus the GAN baseline plus per-cycle ratios.

    Logs are grouped by prompt; each variant is compared against the
    baseline log for the same prompt, and deltas are also averaged per
    variant across prompts.
    """
    if not logs:
        raise ValueError("no logs to compare")
    finals = []
    for log in logs:
        refine = log.refine_rows()
        if not refine:
            raise ValueError("log has no refine rows")
        finals.append(refine[-1])
    total = finals[0].refine_iteration
    if any(f.refine_iteration != total for f in finals):
        raise ValueError("mismatched schedules: logs end at different refine iterations")

    groups: dict[str, list[tuple]] = {}
    for log, final in zip(logs, finals):
        groups.setdefault(final.prompt_id, []).append((log, final))

    entries = []
    baseline_name = None
    for prompt_id, group in groups.items():
        base = next((f for _, f in group if f.variant == "GAN-BSL"), group[0][1])
        baseline_name = baseline_name or base.variant
        for log, final in group:
            entries.append(
                VariantSummary(
                    variant=final.variant,
                    prompt_id=prompt_id,
                    final_fitness=final.mean_fitness,
                    final_hsv=final.mean_hsv_diversity,
                    final_vit=final.mean_vit_diversity,
                    delta_fitness=final.mean_fitness - base.mean_fitness,
                    delta_hsv=final.mean_hsv_diversity - base.mean_hsv_diversity,
                    delta_vit=final.mean_vit_diversity - base.mean_vit_diversity,
                    cycles=_cycle_deltas(log),
                )
            )

    by_variant: dict[str, list[VariantSummary]] = {}
    for entry in entries:
        by_variant.setdefault(entry.variant, []).append(entry)
    averages = [
        VariantAverage(
            variant=name,
            n_prompts=len(group),
            delta_fitness=float(np.mean([e.delta_fitness for e in group])),
            delta_hsv=float(np.mean([e.delta_hsv for e in group])),
            delta_vit=float(np.mean([e.delta_vit for e in group])),
        )
        for name, group in by_variant.items()
    ]
    return RunComparison(baseline=baseline_name, entries=entries, averages=averages)


def select_showcase(pop, kind: DistanceMetricKind, n: int) -> list[Individual]:
    """Top-n individuals by single-nearest-neighbor distance (duplicates last)."""
    if n > len(pop):
        raise ValueError(f"cannot showcase {n} of {len(pop)}")
    nn = nearest_neighbor_distance(pop, kind)
    order = np.argsort(-nn, kind="stable")
    return [pop[int(i)] for i in order[:n]]
