"""Domain types, configuration and deterministic RNG streams.

Everything downstream (decoding, metrics, refinement, exploration,
orchestration) builds on the types defined here.  Conventions:

* a *genome* is a 1-D int64 array of length ``grid_w * grid_h`` whose
  entries index a codebook,
* an *image* is a float64 array of shape ``(height, width, 3)`` with
  channels in [0, 1],
* all randomness flows through labeled streams derived from one master
  seed, so a full experiment is reproducible bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

__all__ = [
    "EngineConfig",
    "Individual",
    "RngStream",
    "ConfigError",
    "fnv1a_64",
    "derive_stream",
    "validate_config",
    "ensure_valid",
    "desk_config",
    "full_config",
    "new_genome",
    "validate_genome",
    "validate_image",
    "config_to_json",
    "config_from_json",
]

_UINT64_MASK = 0xFFFFFFFFFFFFFFFF


class ConfigError(ValueError):
    """Raised when a configuration violates its invariants.

    ``problems`` lists every violated invariant, not just the first.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash, pinned so hashes are stable across platforms."""
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & _UINT64_MASK
    return h


@dataclass(frozen=True)
class EngineConfig:
    """Geometry and population parameters shared by every module.

    The image is a ``grid_h x grid_w`` tiling of ``block_px``-sided pixel
    blocks, so the genome length is ``grid_w * grid_h`` and the image is
    ``(grid_h * block_px) x (grid_w * block_px)`` pixels.  Defaults match
    the full-scale setup (384x384 image, 576 genes, 16384 codebook
    entries); :func:`desk_config` gives a small preset for fast runs.
    """

    grid_w: int = 24
    grid_h: int = 24
    block_px: int = 16
    codebook_size: int = 16384
    population_size: int = 50
    master_seed: int = 0

    @property
    def genome_length(self) -> int:
        return self.grid_w * self.grid_h

    @property
    def image_width(self) -> int:
        return self.grid_w * self.block_px

    @property
    def image_height(self) -> int:
        return self.grid_h * self.block_px

    def replace(self, **kwargs) -> "EngineConfig":
        return replace(self, **kwargs)


def desk_config(master_seed: int = 0, population_size: int = 50) -> EngineConfig:
    """Small preset (256-entry codebook, 8x8 grid of 8px blocks) for CI."""
    return EngineConfig(
        grid_w=8,
        grid_h=8,
        block_px=8,
        codebook_size=256,
        population_size=population_size,
        master_seed=master_seed,
    )


def full_config(master_seed: int = 0) -> EngineConfig:
    """Full-scale preset: 384x384 images, 576 genes, 16384 codebook entries."""
    return EngineConfig(master_seed=master_seed)


def validate_config(cfg: EngineConfig) -> list[str]:
    """Return every violated invariant (empty list means the config is valid)."""
    problems: list[str] = []
    if cfg.grid_w < 1:
        problems.append("grid_w must be >= 1")
    if cfg.grid_h < 1:
        problems.append("grid_h must be >= 1")
    if cfg.block_px < 1:
        problems.append("block_px must be >= 1")
    if cfg.codebook_size < 2:
        problems.append("codebook_size must be >= 2")
    if cfg.population_size < 2:
        problems.append("population_size must be >= 2 (neighbors are required)")
    if not (0 <= cfg.master_seed <= _UINT64_MASK):
        problems.append("master_seed must fit in 64 unsigned bits")
    return problems


def ensure_valid(cfg: EngineConfig) -> EngineConfig:
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


@dataclass(frozen=True)
class RngStream:
    """A labeled, reproducible random stream.

    Streams are derived from ``(master_seed, label)``; the same pair always
    yields the same draw sequence and distinct labels give independent
    sequences.  ``generator()`` returns a fresh generator positioned at the
    start of the stream, so callers own their cursor.
    """

    seed: int
    label: str

    def _seed_seq(self) -> np.random.SeedSequence:
        return np.random.SeedSequence([self.seed & _UINT64_MASK, fnv1a_64(self.label.encode("utf-8"))])

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._seed_seq()))


def derive_stream(master_seed: int, label: str) -> RngStream:
    """Derive the labeled stream for one concern (mutation, init, ...)."""
    if not label:
        raise ValueError("stream label must be nonempty")
    return RngStream(seed=master_seed, label=label)


def new_genome(indices, cfg: EngineConfig) -> np.ndarray:
    """Build and validate a genome array from any integer sequence."""
    g = np.asarray(indices, dtype=np.int64)
    validate_genome(g, cfg)
    return g


def validate_genome(genome: np.ndarray, cfg: EngineConfig) -> None:
    if genome.ndim != 1 or genome.shape[0] != cfg.genome_length:
        raise ValueError(
            f"genome length {genome.shape} does not match grid {cfg.grid_w}x{cfg.grid_h}"
        )
    if genome.min(initial=0) < 0 or genome.max(initial=0) >= cfg.codebook_size:
        raise ValueError("genome indices outside [0, codebook_size)")


def validate_image(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"image must have shape (H, W, 3), got {img.shape}")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("image channels outside [0, 1]")


@dataclass
class Individual:
    """A genome plus lazily-filled caches of everything derived from it.

    Caches are either ``None`` or consistent with the genome: recomputing
    through the same code path reproduces them exactly, and any two
    evaluation paths agree to 1e-12.
    """

    genome: np.ndarray
    phenotype: Optional[np.ndarray] = None
    fitness: Optional[float] = None
    hsv: Optional["HsvSummary"] = None  # imagemetrics.HsvSummary
    embedding: Optional[np.ndarray] = None

    def copy(self) -> "Individual":
        return Individual(
            genome=self.genome.copy(),
            phenotype=None if self.phenotype is None else self.phenotype.copy(),
            fitness=self.fitness,
            hsv=self.hsv,
            embedding=None if self.embedding is None else self.embedding.copy(),
        )

    def invalidate(self) -> None:
        """Drop caches derived from the phenotype (after in-place genome edits)."""
        self.fitness = None
        self.hsv = None
        self.embedding = None


# --- flat JSON config document -------------------------------------------
#
# The on-disk config is a single flat JSON object holding the EngineConfig
# fields plus schedule/variant/backend keys (dotted names are literal keys).
# Unknown keys are an error so typos cannot silently change a run.

_ENGINE_KEYS = {f.name for f in fields(EngineConfig)}

_EXTRA_KEYS = {
    "total_refine_iters",
    "interrupt_at",
    "nslc_generations",
    "variant",
    "prompt",
    "oracle.backend",
    "oracle.sidecar_url",
    "oracle.max_in_flight",
    "refine.backend",
    "refine.positions_per_step",
    "refine.candidates_per_position",
    "nslc.k",
    "nslc.e",
    "nslc.mutation_rate",
}

KNOWN_CONFIG_KEYS = _ENGINE_KEYS | _EXTRA_KEYS


def config_to_json(cfg: EngineConfig, extras: Optional[dict] = None) -> str:
    """Serialize to the canonical flat JSON document (byte-stable)."""
    doc = {f.name: getattr(cfg, f.name) for f in fields(EngineConfig)}
    for key, value in (extras or {}).items():
        if key not in KNOWN_CONFIG_KEYS:
            raise ConfigError([f"unknown config key: {key!r}"])
        doc[key] = value
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_from_json(text: str) -> tuple[EngineConfig, dict]:
    """Parse the flat JSON document into (EngineConfig, extras dict).

    Every violated invariant and every unknown key is reported at once.
    """
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ConfigError(["config document must be a JSON object"])
    problems = [f"unknown config key: {k!r}" for k in sorted(set(doc) - KNOWN_CONFIG_KEYS)]
    engine_kwargs = {k: doc[k] for k in _ENGINE_KEYS if k in doc}
    cfg = EngineConfig(**engine_kwargs)
    problems.extend(validate_config(cfg))
    if problems:
        raise ConfigError(problems)
    extras = {k: v for k, v in doc.items() if k in _EXTRA_KEYS}
    return cfg, extras
