"""Image-space measurement: HSV statistics, distances, population diversity.

Hue is cyclic, so its mean is the resultant-vector circular mean and its
deviation is the wrapped signed difference folded into [-0.5, 0.5].  The
chromatic distance between two images is the mean of squared differences
of the six summary statistics, with the hue-mean term measured around the
circle.  The synthetic embedding is a box-filtered 16x16x3 thumbnail spun
through a fixed orthonormal rotation; it stands in for a learned image
tower while preserving distances (the rotation is a near-isometry).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import derive_stream, validate_image

__all__ = [
    "HsvSummary",
    "DistanceMetricKind",
    "EMBED_GRID",
    "EMBED_DIM",
    "rgb_to_hsv",
    "hsv_summary",
    "hsv_distance",
    "hsv_features",
    "hsv_distance_matrix",
    "embedding_distance",
    "embedding_distance_matrix",
    "box_filter_weights",
    "downsample_thumbnail",
    "rotation_matrix",
    "synthetic_embedding",
    "population_diversity",
    "distance_matrix",
    "nearest_neighbor_distance",
]

EMBED_GRID = 16
EMBED_DIM = EMBED_GRID * EMBED_GRID * 3  # 768

# Fixed library-level seed: embeddings must be comparable across runs with
# different master seeds, so the rotation cannot depend on config.
_ROTATION_SEED = 0x9E3779B97F4A7C15


class DistanceMetricKind(Enum):
    HSV = "hsv"
    EMBEDDING = "embedding"


@dataclass(frozen=True)
class HsvSummary:
    """Six-number chromatic record: circular hue stats, plain s/b stats."""

    mean_h: float
    std_h: float
    mean_s: float
    std_s: float
    mean_b: float
    std_b: float
    n_pixels: int

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.mean_h, self.std_h, self.mean_s, self.std_s, self.mean_b, self.std_b]
        )


def rgb_to_hsv(rgb) -> np.ndarray:
    """Hexcone RGB -> HSV on the last axis; achromatic pixels get h=0, s=0.

    Accepts a single (r, g, b) triple or any (..., 3) array with channels
    in [0, 1].  Hue lands in [0, 1).
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    delta = maxc - minc
    chromatic = delta > 0.0
    safe_delta = np.where(chromatic, delta, 1.0)
    h_r = np.mod((g - b) / safe_delta, 6.0)
    h_g = (b - r) / safe_delta + 2.0
    h_b = (r - g) / safe_delta + 4.0
    h6 = np.where(maxc == r, h_r, np.where(maxc == g, h_g, h_b))
    h = np.where(chromatic, np.mod(h6 / 6.0, 1.0), 0.0)
    s = np.where(maxc > 0.0, delta / np.where(maxc > 0.0, maxc, 1.0), 0.0)
    return np.stack([h, s, maxc], axis=-1)


def _wrap_delta(h: np.ndarray, center: float) -> np.ndarray:
    """Signed hue difference h - center folded into [-0.5, 0.5]."""
    return np.mod(h - center + 0.5, 1.0) - 0.5


def hsv_summary(img: np.ndarray) -> HsvSummary:
    """Chromatic statistics of an image (sample std, divisor N-1)."""
    validate_image(img)
    n = img.shape[0] * img.shape[1]
    if n == 0:
        raise ValueError("empty image")
    hsv = rgb_to_hsv(img).reshape(-1, 3)
    h, s, v = hsv[:, 0], hsv[:, 1], hsv[:, 2]
    theta = 2.0 * np.pi * h
    mean_h = float(np.mod(np.arctan2(np.sin(theta).sum(), np.cos(theta).sum()) / (2.0 * np.pi), 1.0))
    if mean_h >= 1.0:  # mod can round up to 1.0 for tiny negative angles
        mean_h = 0.0
    if n > 1:
        std_h = float(np.sqrt((_wrap_delta(h, mean_h) ** 2).sum() / (n - 1)))
        std_s = float(np.std(s, ddof=1))
        std_b = float(np.std(v, ddof=1))
    else:
        std_h = std_s = std_b = 0.0
    return HsvSummary(
        mean_h=mean_h,
        std_h=std_h,
        mean_s=float(s.mean()),
        std_s=std_s,
        mean_b=float(v.mean()),
        std_b=std_b,
        n_pixels=n,
    )


def _hsv_metric_terms(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|difference| of the six summary stats; hue mean measured circularly."""
    m = np.abs(a - b)
    dh = m[..., 0]
    m[..., 0] = np.minimum(dh, 1.0 - dh)
    return m


def hsv_distance(a: HsvSummary, b: HsvSummary) -> float:
    """Mean of the six squared metric terms (not a true metric; no sqrt)."""
    m = _hsv_metric_terms(a.as_vector(), b.as_vector())
    return float((m**2).mean(axis=-1))


def hsv_features(summaries: Sequence[HsvSummary]) -> np.ndarray:
    return np.stack([s.as_vector() for s in summaries], axis=0)


def hsv_distance_matrix(feats_a: np.ndarray, feats_b: np.ndarray) -> np.ndarray:
    m = _hsv_metric_terms(feats_a[:, None, :], feats_b[None, :, :])
    return (m**2).mean(axis=-1)


def embedding_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Euclidean distance; dimensions must match exactly."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"embedding dimension mismatch: {u.shape} vs {v.shape}")
    return float(np.sqrt(((u - v) ** 2).sum()))


def embedding_distance_matrix(emb_a: np.ndarray, emb_b: np.ndarray) -> np.ndarray:
    if emb_a.shape[1] != emb_b.shape[1]:
        raise ValueError("embedding dimension mismatch")
    out = np.empty((emb_a.shape[0], emb_b.shape[0]))
    for i in range(emb_a.shape[0]):  # row-wise keeps memory flat and bits equal to the scalar path
        out[i] = np.sqrt(((emb_b - emb_a[i]) ** 2).sum(axis=1))
    return out


@lru_cache(maxsize=32)
def box_filter_weights(src: int, dst: int = EMBED_GRID) -> np.ndarray:
    """(dst, src) row weights: fractional-coverage box filter, rows sum to 1."""
    w = np.zeros((dst, src))
    scale = src / dst
    for i in range(dst):
        lo, hi = i * scale, (i + 1) * scale
        j = np.arange(src)
        overlap = np.minimum(hi, j + 1.0) - np.maximum(lo, j.astype(np.float64))
        w[i] = np.maximum(overlap, 0.0) / scale
    return w


def downsample_thumbnail(img: np.ndarray) -> np.ndarray:
    """Box-filter the image to (EMBED_GRID, EMBED_GRID, 3)."""
    wr = box_filter_weights(img.shape[0])
    wc = box_filter_weights(img.shape[1])
    return np.stack([(wr @ img[:, :, c]) @ wc.T for c in range(3)], axis=-1)


def _orthonormal_rotation(dim: int, seed: int, label: str) -> np.ndarray:
    gen = derive_stream(seed, label).generator()
    a = gen.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[None, :]


@lru_cache(maxsize=1)
def rotation_matrix() -> np.ndarray:
    """The fixed 768x768 rotation, computed once and shared read-only."""
    return _orthonormal_rotation(EMBED_DIM, _ROTATION_SEED, "embedding-rotation")


def synthetic_embedding(img: np.ndarray) -> np.ndarray:
    """Deterministic 768-dim stand-in for a learned image embedding."""
    validate_image(img)
    flat = downsample_thumbnail(img).reshape(-1)
    return rotation_matrix() @ flat


def _features_for(items, kind: DistanceMetricKind) -> np.ndarray:
    if kind is DistanceMetricKind.HSV:
        missing = [i for i, it in enumerate(items) if it.hsv is None]
        if missing:
            raise ValueError(f"hsv cache missing on individuals {missing[:5]}")
        return hsv_features([it.hsv for it in items])
    missing = [i for i, it in enumerate(items) if it.embedding is None]
    if missing:
        raise ValueError(f"embedding cache missing on individuals {missing[:5]}")
    return np.stack([it.embedding for it in items], axis=0)


def distance_matrix(items_a, items_b, kind: DistanceMetricKind) -> np.ndarray:
    """Pairwise behavioral distances between two cached-individual lists."""
    fa = _features_for(items_a, kind)
    fb = _features_for(items_b, kind)
    if kind is DistanceMetricKind.HSV:
        return hsv_distance_matrix(fa, fb)
    return embedding_distance_matrix(fa, fb)


def population_diversity(pop, kind: DistanceMetricKind, k: int = 15) -> float:
    """Mean over the population of the mean distance to k nearest neighbors.

    Only the population itself is searched for neighbors (no archive).  If
    the population has at most k other members, all of them are used and a
    warning is emitted.
    """
    n = len(pop)
    if n < 2:
        raise ValueError("population diversity needs at least 2 individuals")
    k_eff = min(k, n - 1)
    if k_eff < k:
        warnings.warn(
            f"population of {n} has fewer than k={k} neighbors; using all {k_eff}",
            stacklevel=2,
        )
    dists = distance_matrix(pop, pop, kind)
    np.fill_diagonal(dists, np.inf)
    part = np.sort(dists, axis=1)[:, :k_eff]
    return float(part.mean(axis=1).mean())


def nearest_neighbor_distance(pop, kind: DistanceMetricKind) -> np.ndarray:
    """Each individual's distance to its single nearest neighbor."""
    dists = distance_matrix(pop, pop, kind)
    np.fill_diagonal(dists, np.inf)
    return dists.min(axis=1)
