"""qdforge: quality-diversity evolution of discrete latent genomes.

Alternates oracle-guided refinement cycles with novelty-search-with-
local-competition exploration cycles over populations of codebook-index
genomes, with fully deterministic synthetic backends and an optional
remote bridge to real perceptual models.
"""

from .core import (
    ConfigError,
    EngineConfig,
    Individual,
    RngStream,
    derive_stream,
    desk_config,
    full_config,
    validate_config,
)
from .decoder import Codebook, decode, generate_codebook, init_genome_fractal
from .evaluation import EvalContext
from .evolve import (
    NoveltyArchive,
    NoveltyParams,
    ObjectivePair,
    local_competition_score,
    mutate,
    nondominated_sort,
    novelty_score,
    nslc_generation,
    sparsity_truncate,
)
from .imagemetrics import (
    DistanceMetricKind,
    HsvSummary,
    embedding_distance,
    hsv_distance,
    hsv_summary,
    population_diversity,
    rgb_to_hsv,
    synthetic_embedding,
)
from .metrics import MetricsRow, RunMetrics
from .oracle import (
    PROMPT_PRESETS,
    PromptVector,
    RemoteOracle,
    SyntheticOracle,
    cosine_similarity,
    embed_prompt_synthetic,
    score,
)
from .orchestrator import (
    CycleSchedule,
    RunResult,
    VariantSpec,
    VARIANTS,
    compare_runs,
    desk_schedule,
    full_schedule,
    run_variant,
    select_showcase,
)
from .refine import RefineParams, refine_population, refine_step
from .sidecar_client import SidecarClient, SidecarError, SidecarUnavailable

__version__ = "0.1.0"
