"""The exploration cycle: novelty search with local competition.

Each generation mutates every member, pools parents with offspring, scores
the pool on two maximized objectives (novelty: mean behavioral distance to
the k nearest neighbors among pool and archive; local competition: the
fraction of those same neighbors strictly outperformed in fitness), then
selects survivors by non-dominated sorting with a sparsity-driven
truncation of the last admitted front.  The archive receives the e most
novel pool members per generation, holds measurement snapshots only (its
members never re-enter the population), and is reset between exploration
cycles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Individual
from .decoder import decode
from .imagemetrics import DistanceMetricKind, distance_matrix
from .oracle import PromptVector

__all__ = [
    "NoveltyParams",
    "ArchiveEntry",
    "NoveltyArchive",
    "ObjectivePair",
    "mutate",
    "novelty_score",
    "local_competition_score",
    "objective_pairs",
    "nondominated_sort",
    "sparsity_truncate",
    "nslc_generation",
]


@dataclass(frozen=True)
class NoveltyParams:
    k: int = 15
    e: int = 3
    generations: int = 50
    mutation_rate: float = 0.05
    metric: DistanceMetricKind = DistanceMetricKind.HSV

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.e < 0:
            raise ValueError("e must be >= 0")
        if not (0.0 < self.mutation_rate <= 1.0):
            raise ValueError("mutation_rate must be in (0, 1]")


@dataclass(frozen=True)
class ArchiveEntry:
    """Measurement snapshot: distance caches plus the fitness needed when
    an archive member lands among a pool individual's nearest neighbors."""

    hsv: object
    embedding: np.ndarray
    fitness: float


@dataclass
class NoveltyArchive:
    entries: list[ArchiveEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def add_snapshot(self, ind: Individual) -> None:
        self.entries.append(
            ArchiveEntry(hsv=ind.hsv, embedding=ind.embedding, fitness=ind.fitness)
        )


@dataclass(frozen=True)
class ObjectivePair:
    novelty: float
    local_competition: float


def mutate(genome: np.ndarray, rate: float, rng: np.random.Generator, codebook_size: int) -> np.ndarray:
    """Resample round(rate * L) distinct positions with uniform indices.

    A resampled position may draw its old value again; untouched genes are
    copied verbatim.
    """
    if not (0.0 < rate <= 1.0):
        raise ValueError("mutation rate must be in (0, 1]")
    n = int(round(rate * genome.shape[0]))
    out = genome.copy()
    if n == 0:
        return out
    positions = rng.choice(genome.shape[0], size=n, replace=False)
    out[positions] = rng.integers(0, codebook_size, size=n)
    return out


def _neighbor_candidates(ind: Individual, pop, archive: NoveltyArchive):
    others = [x for x in pop if x is not ind]
    return others + list(archive.entries)


def _nearest(ind: Individual, candidates, params: NoveltyParams):
    """Distances to candidates and the (stable) order of the k nearest."""
    if not candidates:
        raise ValueError("empty neighbor set")
    dists = distance_matrix([ind], candidates, params.metric)[0]
    order = np.argsort(dists, kind="stable")
    return dists, order[: min(params.k, len(candidates))]


def novelty_score(ind: Individual, pop, archive: NoveltyArchive, params: NoveltyParams) -> float:
    """Mean distance to the k nearest of (pop minus self) union archive."""
    dists, nearest = _nearest(ind, _neighbor_candidates(ind, pop, archive), params)
    return float(np.mean(dists[nearest]))


def local_competition_score(
    ind: Individual, pop, archive: NoveltyArchive, params: NoveltyParams
) -> float:
    """Fraction (out of k) of the same nearest neighbors strictly outperformed."""
    candidates = _neighbor_candidates(ind, pop, archive)
    _, nearest = _nearest(ind, candidates, params)
    wins = sum(1 for j in nearest if ind.fitness > candidates[j].fitness)
    return wins / params.k


def objective_pairs(pool, archive: NoveltyArchive, params: NoveltyParams) -> list[ObjectivePair]:
    """Novelty and LC for every pool member, sharing one neighbor search.

    The distance matrix over pool + archive is computed once; novelty and
    local competition for each individual read the same k-nearest set.
    """
    items = list(pool) + list(archive.entries)
    if len(items) < 2:
        raise ValueError("empty neighbor set")
    dists = distance_matrix(items, items, params.metric)
    fitnesses = np.array([it.fitness for it in items])
    out = []
    for i in range(len(pool)):
        row = dists[i].copy()
        row[i] = np.inf  # self is never a neighbor
        order = np.argsort(row, kind="stable")
        nearest = order[: min(params.k, len(items) - 1)]
        novelty = float(np.mean(row[nearest]))
        wins = int((fitnesses[nearest] < pool[i].fitness).sum())
        out.append(ObjectivePair(novelty=novelty, local_competition=wins / params.k))
    return out


def _objectives_array(points) -> np.ndarray:
    return np.array([[p.novelty, p.local_competition] for p in points], dtype=np.float64)


def nondominated_sort(points) -> list[list[int]]:
    """Fast non-dominated sort, both objectives maximized, stable within fronts."""
    if not points:
        raise ValueError("nondominated_sort needs at least one point")
    obj = _objectives_array(points)
    a, b = obj[:, None, :], obj[None, :, :]
    dominates = (a >= b).all(axis=2) & (a > b).any(axis=2)  # [p, q] = p dominates q
    counts = dominates.sum(axis=0).astype(np.int64)
    fronts: list[list[int]] = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        fronts.append([int(i) for i in current])
        counts = counts - dominates[current].sum(axis=0)
        counts[current] = -1
        current = np.flatnonzero(counts == 0)
    return fronts


def sparsity_truncate(front, n_keep: int) -> list[int]:
    """Thin a front to n_keep points, preferring sparse regions.

    Objectives are min-max normalized per dimension over the surviving
    points (a dimension with zero spread is skipped).  Each active
    dimension's sorted endpoints are boundary points with infinite
    crowding; interior crowding is the summed Manhattan gap between each
    point's neighbors along the sorted dimensions.  The point with the
    lowest crowding value is pruned and crowding recomputed, ties pruning
    the highest input index, until n_keep survive.  Returned indices are
    ascending input positions.
    """
    n = len(front)
    if n_keep > n:
        raise ValueError(f"cannot keep {n_keep} of {n} points")
    obj = _objectives_array(front)
    alive = list(range(n))
    while len(alive) > n_keep:
        sub = obj[alive]
        crowding = np.zeros(len(alive))
        boundary = np.zeros(len(alive), dtype=bool)
        for d in range(sub.shape[1]):
            lo, hi = sub[:, d].min(), sub[:, d].max()
            if hi == lo:
                continue
            norm = (sub[:, d] - lo) / (hi - lo)
            order = np.argsort(norm, kind="stable")
            boundary[order[0]] = True
            boundary[order[-1]] = True
            inner = order[1:-1]
            if inner.size:
                crowding[inner] += norm[order[2:]] - norm[order[:-2]]
        crowding[boundary] = np.inf
        worst = crowding.min()
        candidates = np.flatnonzero(crowding == worst)
        alive.pop(int(candidates[-1]))  # ties prune the highest index, keeping low ones
    return alive


def _select_survivors(pairs, n_keep: int) -> list[int]:
    fronts = nondominated_sort(pairs)
    chosen: list[int] = []
    for front in fronts:
        if len(chosen) + len(front) <= n_keep:
            chosen.extend(front)
            if len(chosen) == n_keep:
                break
        else:
            slots = n_keep - len(chosen)
            kept = sparsity_truncate([pairs[i] for i in front], slots)
            chosen.extend(front[i] for i in kept)
            break
    return chosen


def nslc_generation(
    pop: list[Individual],
    archive: NoveltyArchive,
    params: NoveltyParams,
    prompt: PromptVector,
    ctx,
    rng: np.random.Generator,
) -> tuple[list[Individual], NoveltyArchive]:
    """One mu+lambda NSLC generation; returns (survivors, grown archive)."""
    n = len(pop)
    offspring = []
    for parent in pop:
        child = Individual(genome=mutate(parent.genome, params.mutation_rate, rng, ctx.cfg.codebook_size))
        child.phenotype = decode(child.genome, ctx.book, ctx.cfg)
        child.fitness = ctx.score_image(child.phenotype, prompt)
        ctx.refresh_measures(child)
        offspring.append(child)
    pool = list(pop) + offspring
    pairs = objective_pairs(pool, archive, params)
    survivors = [pool[i] for i in _select_survivors(pairs, n)]
    novelties = np.array([p.novelty for p in pairs])
    most_novel = np.argsort(-novelties, kind="stable")[: params.e]
    for i in most_novel:
        archive.add_snapshot(pool[int(i)])
    return survivors, archive
