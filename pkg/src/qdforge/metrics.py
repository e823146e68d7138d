"""Run measurement: per-iteration metric rows, JSONL logs, CSV export.

A row is written after every refinement iteration and every exploration
generation.  Serialized logs are canonical (sorted keys, compact
separators, shortest-roundtrip floats) so identical runs produce
byte-identical files; wall-clock timings are kept in memory and only
serialized when explicitly requested, because they can never be
reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable

from .imagemetrics import DistanceMetricKind, population_diversity

__all__ = [
    "DIVERSITY_NEIGHBORS",
    "MetricsRow",
    "RunMetrics",
    "mean_fitness",
    "measure_population",
    "export_plot_series",
]

# Neighbor count used by the logged diversity measures.
DIVERSITY_NEIGHBORS = 15

ROW_FIELDS = (
    "variant",
    "prompt_id",
    "refine_iteration",
    "phase",
    "mean_fitness",
    "mean_hsv_diversity",
    "mean_vit_diversity",
    "wall_ms",
)

METRIC_FIELDS = ("mean_fitness", "mean_hsv_diversity", "mean_vit_diversity")


@dataclass(frozen=True)
class MetricsRow:
    variant: str
    prompt_id: str
    refine_iteration: int
    phase: str  # "refine" | "explore"
    mean_fitness: float
    mean_hsv_diversity: float
    mean_vit_diversity: float
    wall_ms: float = 0.0

    def to_json(self, timings: bool = False) -> str:
        doc = asdict(self)
        if not timings:
            del doc["wall_ms"]
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def mean_fitness(pop) -> float:
    """Exact-summation mean: per-individual monotonicity lifts to the log."""
    return math.fsum(ind.fitness for ind in pop) / len(pop)


def measure_population(
    pop,
    *,
    variant: str,
    prompt_id: str,
    refine_iteration: int,
    phase: str,
    wall_ms: float = 0.0,
) -> MetricsRow:
    return MetricsRow(
        variant=variant,
        prompt_id=prompt_id,
        refine_iteration=refine_iteration,
        phase=phase,
        mean_fitness=mean_fitness(pop),
        mean_hsv_diversity=population_diversity(pop, DistanceMetricKind.HSV, DIVERSITY_NEIGHBORS),
        mean_vit_diversity=population_diversity(
            pop, DistanceMetricKind.EMBEDDING, DIVERSITY_NEIGHBORS
        ),
        wall_ms=wall_ms,
    )


@dataclass
class RunMetrics:
    """The ordered log of one run."""

    rows: list[MetricsRow]

    def refine_rows(self) -> list[MetricsRow]:
        return [r for r in self.rows if r.phase == "refine"]

    def explore_rows(self) -> list[MetricsRow]:
        return [r for r in self.rows if r.phase == "explore"]

    def to_jsonl(self, timings: bool = False) -> str:
        return "".join(row.to_json(timings) + "\n" for row in self.rows)

    def write_jsonl(self, path, timings: bool = False) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl(timings))

    @classmethod
    def from_jsonl(cls, text: str) -> "RunMetrics":
        rows = []
        for line in text.splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            doc.setdefault("wall_ms", 0.0)
            rows.append(MetricsRow(**doc))
        return cls(rows=rows)

    @classmethod
    def read_jsonl(cls, path) -> "RunMetrics":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())


def export_plot_series(log: RunMetrics) -> dict[str, list[tuple[int, float]]]:
    """Per-metric (iteration, value) series with explore rows collapsed.

    Exploration rows are collapsed to their terminal value at the
    interrupt iteration: the value plotted at an interrupted iteration is
    the state the next refinement segment actually starts from.
    """
    series: dict[str, list[tuple[int, float]]] = {m: [] for m in METRIC_FIELDS}
    by_iter: dict[int, MetricsRow] = {}
    for row in log.rows:
        by_iter[row.refine_iteration] = row  # later rows (explore) overwrite refine
    for iteration in sorted(by_iter):
        row = by_iter[iteration]
        for m in METRIC_FIELDS:
            series[m].append((iteration, getattr(row, m)))
    return series


def series_to_csv(points: Iterable[tuple[int, float]]) -> str:
    lines = ["iteration,value"]
    for iteration, value in points:
        lines.append(f"{iteration},{value:.17g}")
    return "\n".join(lines) + "\n"
