import colorsys
import math

import numpy as np
import pytest

from conftest import random_summary, stub_individual

from qdforge.decoder import hsv_to_rgb
from qdforge.imagemetrics import (
    DistanceMetricKind,
    downsample_thumbnail,
    embedding_distance,
    hsv_distance,
    hsv_summary,
    nearest_neighbor_distance,
    population_diversity,
    rgb_to_hsv,
    rotation_matrix,
    synthetic_embedding,
)


def circ_diff(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def naive_hsv_summary(img):
    """Independent per-pixel reference built on colorsys."""
    pixels = [colorsys.rgb_to_hsv(*img[y, x]) for y in range(img.shape[0]) for x in range(img.shape[1])]
    hs = [p[0] for p in pixels]
    ss = [p[1] for p in pixels]
    vs = [p[2] for p in pixels]
    n = len(pixels)
    sin_sum = sum(math.sin(2 * math.pi * h) for h in hs)
    cos_sum = sum(math.cos(2 * math.pi * h) for h in hs)
    mean_h = (math.atan2(sin_sum, cos_sum) / (2 * math.pi)) % 1.0
    deltas = [((h - mean_h + 0.5) % 1.0) - 0.5 for h in hs]
    std_h = math.sqrt(sum(d * d for d in deltas) / (n - 1))

    def std(xs):
        m = sum(xs) / n
        return math.sqrt(sum((x - m) ** 2 for x in xs) / (n - 1))

    return mean_h, std_h, sum(ss) / n, std(ss), sum(vs) / n, std(vs)


class TestRgbToHsv:
    def test_black(self):
        assert np.allclose(rgb_to_hsv((0.0, 0.0, 0.0)), (0, 0, 0))

    def test_pure_red(self):
        assert np.allclose(rgb_to_hsv((1.0, 0.0, 0.0)), (0, 1, 1))

    def test_pure_green(self):
        # hexcone by hand: max=g, h = ((b-r)/delta + 2)/6 = 1/3
        assert np.allclose(rgb_to_hsv((0.0, 1.0, 0.0)), (1 / 3, 1, 1))

    def test_achromatic_convention(self):
        h, s, v = rgb_to_hsv((0.4, 0.4, 0.4))
        assert h == 0.0 and s == 0.0 and np.isclose(v, 0.4)

    def test_matches_colorsys_on_random_pixels(self):
        gen = np.random.default_rng(11)
        for rgb in gen.random((300, 3)):
            expected = colorsys.rgb_to_hsv(*rgb)
            assert np.allclose(rgb_to_hsv(rgb), expected, atol=1e-12)


class TestHsvSummary:
    def test_uniform_image(self):
        img = np.broadcast_to(hsv_to_rgb(0.25, 0.5, 0.5), (4, 4, 3)).copy()
        s = hsv_summary(img)
        assert abs(s.mean_h - 0.25) < 1e-12
        assert s.std_h == 0.0
        assert abs(s.mean_s - 0.5) < 1e-12 and s.std_s < 1e-15
        assert abs(s.mean_b - 0.5) < 1e-12 and s.std_b < 1e-15
        assert s.n_pixels == 16

    def test_two_pixel_hue_wraparound(self):
        img = np.stack([hsv_to_rgb(0.95, 1.0, 1.0), hsv_to_rgb(0.05, 1.0, 1.0)]).reshape(1, 2, 3)
        s = hsv_summary(img)
        assert circ_diff(s.mean_h, 0.0) < 1e-9
        assert abs(s.std_h - math.sqrt((0.05**2 + 0.05**2) / 1)) < 1e-9

    def test_rotation_of_image_preserves_summary(self):
        gen = np.random.default_rng(12)
        img = gen.random((6, 6, 3))
        a, b = hsv_summary(img), hsv_summary(np.rot90(img).copy())
        assert a == b

    def test_single_pixel_stds_zero(self):
        s = hsv_summary(np.array([[[0.2, 0.7, 0.4]]]))
        assert s.std_h == s.std_s == s.std_b == 0.0

    def test_matches_naive_reference(self):
        gen = np.random.default_rng(13)
        for _ in range(25):
            img = gen.random((8, 8, 3))
            got = hsv_summary(img)
            ref = naive_hsv_summary(img)
            assert abs(got.mean_h - ref[0]) < 1e-12
            assert abs(got.std_h - ref[1]) < 1e-12
            assert abs(got.mean_s - ref[2]) < 1e-12
            assert abs(got.std_s - ref[3]) < 1e-12
            assert abs(got.mean_b - ref[4]) < 1e-12
            assert abs(got.std_b - ref[5]) < 1e-12

    def test_hue_rotation_equivariance(self):
        gen = np.random.default_rng(14)
        for shift in (0.1, 0.37, 0.5, 0.93):
            hues = gen.random((5, 5))
            sats = gen.uniform(0.3, 1.0, (5, 5))
            vals = gen.uniform(0.3, 1.0, (5, 5))
            base = hsv_summary(hsv_to_rgb(hues, sats, vals))
            shifted = hsv_summary(hsv_to_rgb((hues + shift) % 1.0, sats, vals))
            assert circ_diff(shifted.mean_h, (base.mean_h + shift) % 1.0) < 1e-9
            assert abs(shifted.std_h - base.std_h) < 1e-9

    def test_std_bounds(self):
        gen = np.random.default_rng(15)
        for _ in range(50):
            s = hsv_summary(gen.random((8, 8, 3)))
            n = s.n_pixels
            cap = 0.5 * math.sqrt(n / (n - 1))
            assert s.std_h <= 0.5 + 1e-12
            assert s.std_s <= cap and s.std_b <= cap


class TestHsvDistance:
    def test_identical_is_zero(self):
        gen = np.random.default_rng(16)
        s = random_summary(gen)
        assert hsv_distance(s, s) == 0.0

    def test_black_vs_white(self):
        black = hsv_summary(np.zeros((4, 4, 3)))
        white = hsv_summary(np.ones((4, 4, 3)))
        assert abs(hsv_distance(black, white) - 1 / 6) < 1e-15

    def test_hue_wrap_term(self):
        a = hsv_summary(np.broadcast_to(hsv_to_rgb(0.98, 0.8, 0.7), (4, 4, 3)).copy())
        b = hsv_summary(np.broadcast_to(hsv_to_rgb(0.02, 0.8, 0.7), (4, 4, 3)).copy())
        assert abs(hsv_distance(a, b) - 0.04**2 / 6) < 1e-12

    def test_symmetry_on_random_pairs(self):
        gen = np.random.default_rng(17)
        for _ in range(1000):
            a, b = random_summary(gen), random_summary(gen)
            assert hsv_distance(a, b) == hsv_distance(b, a)

    def test_bounded_by_one(self):
        gen = np.random.default_rng(18)
        for _ in range(500):
            assert 0.0 <= hsv_distance(random_summary(gen), random_summary(gen)) <= 1.0


class TestEmbeddingDistance:
    def test_zero_on_equal(self):
        u = np.arange(5.0)
        assert embedding_distance(u, u) == 0.0

    def test_three_four_five(self):
        assert embedding_distance(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 5.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            embedding_distance(np.zeros(768), np.zeros(512))


class TestSyntheticEmbedding:
    def test_deterministic(self):
        gen = np.random.default_rng(19)
        img = gen.random((8, 8, 3))
        assert np.array_equal(synthetic_embedding(img), synthetic_embedding(img))

    def test_black_white_distinct(self):
        d = embedding_distance(
            synthetic_embedding(np.zeros((8, 8, 3))), synthetic_embedding(np.ones((8, 8, 3)))
        )
        assert d > 0.0

    def test_rotation_is_orthonormal(self):
        q = rotation_matrix()
        assert np.abs(q @ q.T - np.eye(q.shape[0])).max() < 1e-12

    def test_near_isometry(self):
        gen = np.random.default_rng(20)
        for _ in range(5):
            a, b = gen.random((16, 16, 3)), gen.random((16, 16, 3))
            d_emb = embedding_distance(synthetic_embedding(a), synthetic_embedding(b))
            d_thumb = embedding_distance(
                downsample_thumbnail(a).reshape(-1), downsample_thumbnail(b).reshape(-1)
            )
            assert abs(d_emb - d_thumb) <= 0.01 * d_thumb

    def test_downsample_preserves_mean(self):
        gen = np.random.default_rng(21)
        img = gen.random((24, 40, 3))
        thumb = downsample_thumbnail(img)
        assert thumb.shape == (16, 16, 3)
        for c in range(3):
            assert abs(thumb[:, :, c].mean() - img[:, :, c].mean()) < 1e-12


def naive_population_diversity(pop, kind, k):
    values = []
    for i, a in enumerate(pop):
        dists = []
        for j, b in enumerate(pop):
            if i == j:
                continue
            if kind is DistanceMetricKind.HSV:
                dists.append(hsv_distance(a.hsv, b.hsv))
            else:
                dists.append(embedding_distance(a.embedding, b.embedding))
        dists.sort()
        keep = dists[: min(k, len(dists))]
        values.append(sum(keep) / len(keep))
    return sum(values) / len(values)


class TestPopulationDiversity:
    def test_identical_individuals_zero(self):
        gen = np.random.default_rng(22)
        ind = stub_individual(gen)
        pop = [ind] * 20
        assert population_diversity(pop, DistanceMetricKind.HSV, 15) == 0.0

    def test_permutation_invariance(self):
        gen = np.random.default_rng(23)
        pop = [stub_individual(gen) for _ in range(20)]
        shuffled = list(pop)
        np.random.default_rng(1).shuffle(shuffled)
        a = population_diversity(pop, DistanceMetricKind.EMBEDDING, 5)
        b = population_diversity(shuffled, DistanceMetricKind.EMBEDDING, 5)
        assert abs(a - b) < 1e-12

    def test_seventeen_point_brute_force(self):
        gen = np.random.default_rng(24)
        pop = [stub_individual(gen) for _ in range(17)]
        got = population_diversity(pop, DistanceMetricKind.HSV, 15)
        ref = naive_population_diversity(pop, DistanceMetricKind.HSV, 15)
        assert abs(got - ref) < 1e-12

    def test_small_population_warns_and_uses_all(self):
        gen = np.random.default_rng(25)
        pop = [stub_individual(gen) for _ in range(6)]
        with pytest.warns(UserWarning):
            got = population_diversity(pop, DistanceMetricKind.HSV, 15)
        assert abs(got - naive_population_diversity(pop, DistanceMetricKind.HSV, 15)) < 1e-12

    def test_missing_cache_rejected(self):
        gen = np.random.default_rng(26)
        pop = [stub_individual(gen) for _ in range(5)]
        pop[2].hsv = None
        with pytest.raises(ValueError):
            population_diversity(pop, DistanceMetricKind.HSV, 2)

    def test_nearest_neighbor_ranks_duplicates_last(self):
        gen = np.random.default_rng(27)
        pop = [stub_individual(gen) for _ in range(6)]
        pop.append(pop[0])  # duplicate pair
        nn = nearest_neighbor_distance(pop, DistanceMetricKind.EMBEDDING)
        assert nn[0] == 0.0 and nn[-1] == 0.0
        assert nn[1:-1].min() > 0.0
