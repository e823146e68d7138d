"""Synthetic stand-in for the VQVAE decode path.

A codebook of procedurally generated color blocks replaces pretrained
decoder weights: each entry is a random base HSV color with low-amplitude
per-pixel value noise, which keeps every run deterministic, keeps all
entries pairwise distinct, and makes decode exactly invertible by
nearest-entry matching.  Genome initialization samples a 2-octave value
noise field (persistence 0.5, base frequency 2 control cells per axis;
the true noise parameters of upstream generators vary, so these are
a documented stand-in) over the block lattice so neighboring genes are
spatially correlated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EngineConfig, RngStream, validate_genome

__all__ = [
    "Codebook",
    "generate_codebook",
    "decode",
    "decode_tile",
    "init_genome_fractal",
    "encode_nearest",
    "hsv_to_rgb",
    "ppm_bytes",
    "write_ppm",
    "read_ppm",
    "ppm_from_bytes",
]

NOISE_OCTAVES = 2
NOISE_PERSISTENCE = 0.5
NOISE_BASE_FREQ = 2
VALUE_NOISE_AMP = 0.05


@dataclass(frozen=True)
class Codebook:
    """V procedurally generated pixel blocks, reproducible from one seed."""

    entries: np.ndarray  # (V, block_px, block_px, 3) float64 in [0, 1]
    generation_seed: int

    def __len__(self) -> int:
        return self.entries.shape[0]

    @property
    def block_px(self) -> int:
        return self.entries.shape[1]


def hsv_to_rgb(h, s, v):
    """Vectorized hexcone HSV -> RGB; inputs broadcast, h wraps mod 1."""
    h = np.mod(np.asarray(h, dtype=np.float64), 1.0)
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    i = np.floor(h * 6.0).astype(np.int64) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def generate_codebook(cfg: EngineConfig, rng: RngStream) -> Codebook:
    """Generate the V color blocks for ``cfg`` from a labeled stream."""
    gen = rng.generator()
    v_entries = cfg.codebook_size
    b = cfg.block_px
    base_h = gen.random(v_entries)
    base_s = gen.uniform(0.25, 1.0, v_entries)
    base_v = gen.uniform(0.15, 1.0, v_entries)
    noise = gen.uniform(-VALUE_NOISE_AMP, VALUE_NOISE_AMP, size=(v_entries, b, b))
    value = np.clip(base_v[:, None, None] + noise, 0.0, 1.0)
    entries = hsv_to_rgb(
        np.broadcast_to(base_h[:, None, None], value.shape),
        np.broadcast_to(base_s[:, None, None], value.shape),
        value,
    )
    return Codebook(entries=entries, generation_seed=rng.seed)


def decode(genome: np.ndarray, book: Codebook, cfg: EngineConfig) -> np.ndarray:
    """Tile the image: tile i (row-major) is ``book.entries[genome[i]]``."""
    validate_genome(genome, cfg)
    if len(book) != cfg.codebook_size or book.block_px != cfg.block_px:
        raise ValueError("codebook does not match config geometry")
    b = cfg.block_px
    tiles = book.entries[genome].reshape(cfg.grid_h, cfg.grid_w, b, b, 3)
    return np.ascontiguousarray(
        tiles.transpose(0, 2, 1, 3, 4).reshape(cfg.image_height, cfg.image_width, 3)
    )


def decode_tile(img: np.ndarray, position: int, entry: np.ndarray, cfg: EngineConfig) -> None:
    """Overwrite one tile of ``img`` in place with a codebook entry."""
    gy, gx = divmod(position, cfg.grid_w)
    b = cfg.block_px
    img[gy * b : (gy + 1) * b, gx * b : (gx + 1) * b, :] = entry


def _value_noise_field(grid_h: int, grid_w: int, gen: np.random.Generator) -> np.ndarray:
    """Sum of bilinear-interpolated random lattices, one per octave."""
    field = np.zeros((grid_h, grid_w))
    amp = 1.0
    for octave in range(NOISE_OCTAVES):
        freq = NOISE_BASE_FREQ * (2**octave)
        control = gen.random((freq + 1, freq + 1))
        ys = np.linspace(0.0, freq, grid_h)
        xs = np.linspace(0.0, freq, grid_w)
        y0 = np.minimum(ys.astype(np.int64), freq - 1)
        x0 = np.minimum(xs.astype(np.int64), freq - 1)
        fy = (ys - y0)[:, None]
        fx = (xs - x0)[None, :]
        c00 = control[np.ix_(y0, x0)]
        c01 = control[np.ix_(y0, x0 + 1)]
        c10 = control[np.ix_(y0 + 1, x0)]
        c11 = control[np.ix_(y0 + 1, x0 + 1)]
        octave_field = (
            c00 * (1 - fy) * (1 - fx)
            + c01 * (1 - fy) * fx
            + c10 * fy * (1 - fx)
            + c11 * fy * fx
        )
        field += amp * octave_field
        amp *= NOISE_PERSISTENCE
    return field


def init_genome_fractal(cfg: EngineConfig, rng) -> np.ndarray:
    """Fractal-noise genome: noise field over the lattice, quantized to indices.

    ``rng`` may be an RngStream (fresh cursor) or an np.random.Generator
    (shared cursor, used when many genomes come from one stream).
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    field = _value_noise_field(cfg.grid_h, cfg.grid_w, gen)
    lo, hi = field.min(), field.max()
    norm = np.zeros_like(field) if hi == lo else (field - lo) / (hi - lo)
    indices = np.minimum(
        (norm * cfg.codebook_size).astype(np.int64), cfg.codebook_size - 1
    )
    return indices.reshape(-1)


def encode_nearest(img: np.ndarray, book: Codebook, cfg: EngineConfig) -> np.ndarray:
    """Recover a genome by nearest-entry matching per tile (test utility)."""
    b = cfg.block_px
    tiles = (
        img.reshape(cfg.grid_h, b, cfg.grid_w, b, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(cfg.genome_length, -1)
    )
    flat_entries = book.entries.reshape(len(book), -1)
    # (L, V) squared distances; genome lengths stay small enough for this
    d2 = ((tiles[:, None, :] - flat_entries[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1).astype(np.int64)


# --- PPM (P6) export: the bit-exact, dependency-free image format --------


def ppm_bytes(img: np.ndarray) -> bytes:
    """Binary PPM bytes (P6, maxval 255, channel = round(value * 255))."""
    h, w, _ = img.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    data = np.rint(img * 255.0).astype(np.uint8).tobytes()
    return header + data


def write_ppm(img: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(img))


def read_ppm(path) -> np.ndarray:
    """Read a P6 PPM back to a float image in [0, 1]."""
    with open(path, "rb") as fh:
        return ppm_from_bytes(fh.read())


def ppm_from_bytes(raw: bytes) -> np.ndarray:
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != b"P6" or maxval != 255:
        raise ValueError("only P6 maxval-255 PPM is supported")
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h * 3, offset=pos)
    return data.reshape(h, w, 3).astype(np.float64) / 255.0
