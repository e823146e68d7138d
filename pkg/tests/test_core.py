import json

import numpy as np
import pytest

from qdforge.core import (
    ConfigError,
    EngineConfig,
    config_from_json,
    config_to_json,
    derive_stream,
    desk_config,
    ensure_valid,
    fnv1a_64,
    new_genome,
    validate_config,
)


class TestDeriveStream:
    def test_same_label_same_sequence(self):
        a = derive_stream(42, "mutation").generator().random(100)
        b = derive_stream(42, "mutation").generator().random(100)
        assert np.array_equal(a, b)

    def test_distinct_labels_differ(self):
        a = derive_stream(42, "mutation").generator().random(100)
        b = derive_stream(42, "codebook").generator().random(100)
        assert not np.array_equal(a, b)

    def test_distinct_seeds_differ(self):
        a = derive_stream(42, "x").generator().random(100)
        b = derive_stream(43, "x").generator().random(100)
        assert not np.array_equal(a, b)

    def test_empty_label_rejected(self):
        with pytest.raises(ValueError):
            derive_stream(42, "")

    def test_generator_returns_fresh_cursor(self):
        stream = derive_stream(1, "init")
        first = stream.generator().random(5)
        again = stream.generator().random(5)
        assert np.array_equal(first, again)


class TestFnv1a:
    def test_known_vectors(self):
        # standard FNV-1a 64 test values
        assert fnv1a_64(b"") == 0xCBF29CE484222325
        assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a_64(b"foobar") == 0x85944171F73967E8


class TestValidateConfig:
    def test_defaults_valid_full_scale_geometry(self):
        cfg = EngineConfig()
        assert validate_config(cfg) == []
        assert cfg.genome_length == 576
        assert cfg.image_width == 384
        assert cfg.image_height == 384

    def test_desk_preset(self):
        cfg = desk_config()
        assert validate_config(cfg) == []
        assert cfg.genome_length == 64
        assert cfg.image_width == 64

    def test_codebook_of_one_rejected(self):
        problems = validate_config(EngineConfig(codebook_size=1))
        assert any(">= 2" in p for p in problems)

    def test_all_violations_reported(self):
        problems = validate_config(
            EngineConfig(grid_w=0, grid_h=0, block_px=0, codebook_size=0, population_size=1)
        )
        assert len(problems) == 5

    def test_ensure_valid_raises_with_full_list(self):
        with pytest.raises(ConfigError) as err:
            ensure_valid(EngineConfig(codebook_size=1, population_size=0))
        assert len(err.value.problems) == 2


class TestGenome:
    def test_new_genome_checks_range(self, desk_cfg):
        good = new_genome(np.zeros(desk_cfg.genome_length, dtype=int), desk_cfg)
        assert good.dtype == np.int64
        with pytest.raises(ValueError):
            new_genome(np.full(desk_cfg.genome_length, desk_cfg.codebook_size), desk_cfg)
        with pytest.raises(ValueError):
            new_genome(np.zeros(3, dtype=int), desk_cfg)


class TestConfigDocument:
    def test_round_trip_byte_identical(self):
        text = config_to_json(desk_config(master_seed=9), {"variant": "NSLC-HSV", "nslc.k": 15})
        cfg, extras = config_from_json(text)
        assert config_to_json(cfg, extras) == text

    def test_unknown_key_rejected(self):
        doc = json.dumps({"grid_w": 8, "grid_h": 8, "block_px": 8, "typo_key": 1})
        with pytest.raises(ConfigError) as err:
            config_from_json(doc)
        assert any("typo_key" in p for p in err.value.problems)

    def test_invalid_values_and_unknown_keys_reported_together(self):
        doc = json.dumps({"codebook_size": 1, "bogus": True})
        with pytest.raises(ConfigError) as err:
            config_from_json(doc)
        assert len(err.value.problems) == 2
