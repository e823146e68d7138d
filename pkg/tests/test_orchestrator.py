import json

import numpy as np
import pytest

from qdforge.core import ConfigError, desk_config
from qdforge.metrics import RunMetrics
from qdforge.orchestrator import (
    CycleSchedule,
    RunFailure,
    compare_runs,
    run_variant,
    select_showcase,
    variant_from_name,
)
from qdforge.imagemetrics import DistanceMetricKind
from qdforge.oracle import SyntheticOracle


MINI = CycleSchedule(total_refine_iters=12, interrupt_at=(4, 8), nslc_generations=3)


@pytest.fixture(scope="module")
def mini_cfg():
    return desk_config(master_seed=7, population_size=20)


@pytest.fixture(scope="module")
def mini_bsl(mini_cfg):
    return run_variant("GAN-BSL", "SP2", mini_cfg, MINI)


@pytest.fixture(scope="module")
def mini_hsv(mini_cfg):
    return run_variant("NSLC-HSV", "SP2", mini_cfg, MINI)


class TestScheduleValidation:
    def test_full_scale_defaults_valid(self):
        assert CycleSchedule().validate() == []

    def test_unordered_interrupts(self):
        assert CycleSchedule(interrupt_at=(200, 100)).validate()

    def test_interrupt_beyond_total(self):
        assert CycleSchedule(total_refine_iters=100, interrupt_at=(100,)).validate()

    def test_unknown_variant_lists_names(self):
        with pytest.raises(ConfigError) as err:
            variant_from_name("NSLC-LPIPS")
        msg = err.value.problems[0]
        for name in ("GAN-BSL", "NSLC-HSV", "NSLC-ViT"):
            assert name in msg


class TestScheduleAudit:
    def test_baseline_row_counts(self, mini_bsl):
        assert len(mini_bsl.metrics.refine_rows()) == 12
        assert len(mini_bsl.metrics.explore_rows()) == 0
        assert [r.refine_iteration for r in mini_bsl.metrics.rows] == list(range(1, 13))

    def test_nslc_row_counts(self, mini_hsv):
        assert len(mini_hsv.metrics.refine_rows()) == 12
        assert len(mini_hsv.metrics.explore_rows()) == 2 * 3
        explore_iters = [r.refine_iteration for r in mini_hsv.metrics.explore_rows()]
        assert explore_iters == [4, 4, 4, 8, 8, 8]

    def test_archive_sizes(self, mini_hsv):
        assert mini_hsv.archive_sizes == [9, 9]  # e=3 per generation, 3 generations

    def test_eval_budget_is_schedule_computable(self, mini_cfg, mini_bsl, mini_hsv):
        n = mini_cfg.population_size
        assert mini_bsl.counters["full_scores"] == n
        assert mini_bsl.counters["candidate_scores"] == 12 * n * 8 * 16
        assert mini_hsv.counters["full_scores"] == n + 2 * 3 * n
        assert mini_hsv.counters["candidate_scores"] == 12 * n * 8 * 16

    def test_refine_fitness_non_decreasing_within_segments(self, mini_hsv):
        segments = {(0, 4): [], (4, 8): [], (8, 12): []}
        for row in mini_hsv.metrics.refine_rows():
            for (lo, hi), rows in segments.items():
                if lo < row.refine_iteration <= hi:
                    rows.append(row.mean_fitness)
        for rows in segments.values():
            assert all(b >= a for a, b in zip(rows, rows[1:]))


class TestDeterminismAndSharing:
    def test_same_seed_byte_identical_logs(self, mini_cfg, mini_hsv):
        again = run_variant("NSLC-HSV", "SP2", mini_cfg, MINI)
        assert again.metrics.to_jsonl() == mini_hsv.metrics.to_jsonl()

    def test_initial_population_shared_across_variants(self, mini_cfg):
        captured = {}

        def observer_for(name):
            def observer(event, payload):
                if event == "refine_iteration" and payload["row"].refine_iteration == 1:
                    captured[name] = [i.genome.copy() for i in payload["population"]]
            return observer

        run_variant("GAN-BSL", "SP1", mini_cfg, MINI, observer=observer_for("bsl"))
        run_variant("NSLC-ViT", "SP1", mini_cfg, MINI, observer=observer_for("vit"))
        # after one identical refine iteration the populations still agree
        assert all(np.array_equal(a, b) for a, b in zip(captured["bsl"], captured["vit"]))

    def test_population_entering_exploration_matches_logged(self, mini_cfg):
        seen = {}

        def observer(event, payload):
            if event == "refine_iteration":
                seen[("row", payload["row"].refine_iteration)] = payload["row"].mean_fitness
            if event == "pre_explore":
                pop = payload["population"]
                seen[("pre", payload["iteration"])] = sum(i.fitness for i in pop) / len(pop)

        run_variant("NSLC-HSV", "SP3", mini_cfg, MINI, observer=observer)
        for t in (4, 8):
            assert seen[("pre", t)] == pytest.approx(seen[("row", t)], abs=1e-15)

    def test_wall_ms_excluded_by_default_included_on_request(self, mini_hsv, tmp_path):
        plain = mini_hsv.metrics.to_jsonl()
        timed = mini_hsv.metrics.to_jsonl(timings=True)
        assert "wall_ms" not in plain
        assert "wall_ms" in timed
        path = tmp_path / "m.jsonl"
        mini_hsv.metrics.write_jsonl(path)
        back = RunMetrics.read_jsonl(path)
        assert back.to_jsonl() == plain


class TestCheckpointResume:
    def test_failure_leaves_resumable_checkpoint(self, mini_cfg, tmp_path):
        out = tmp_path / "run"
        prompt_id = "SP2"

        class FlakyOracle(SyntheticOracle):
            def __init__(self):
                self.calls = 0

            def score_image(self, img, prompt):
                self.calls += 1
                if self.calls == 100:  # partway through the second explore cycle
                    raise RuntimeError("injected failure")
                return super().score_image(img, prompt)

        with pytest.raises(RunFailure) as err:
            run_variant("NSLC-HSV", prompt_id, mini_cfg, MINI, oracle=FlakyOracle(), out_dir=out)
        assert err.value.checkpoint_path is not None
        resumed = run_variant(
            "NSLC-HSV", prompt_id, mini_cfg, MINI, resume_from=err.value.checkpoint_path
        )
        clean = run_variant("NSLC-HSV", prompt_id, mini_cfg, MINI)
        assert resumed.metrics.to_jsonl() == clean.metrics.to_jsonl()
        assert all(
            np.array_equal(a.genome, b.genome)
            for a, b in zip(resumed.population, clean.population)
        )

    def test_checkpoint_rejects_mismatched_config(self, mini_cfg, tmp_path):
        out = tmp_path / "run2"

        class FailingOracle(SyntheticOracle):
            def __init__(self):
                self.calls = 0

            def score_image(self, img, prompt):
                self.calls += 1
                if self.calls > 30:
                    raise RuntimeError("boom")
                return super().score_image(img, prompt)

        with pytest.raises(RunFailure) as err:
            run_variant("NSLC-HSV", "SP2", mini_cfg, MINI, oracle=FailingOracle(), out_dir=out)
        other_cfg = mini_cfg.replace(master_seed=8)
        with pytest.raises(ConfigError):
            run_variant("NSLC-HSV", "SP2", other_cfg, MINI, resume_from=err.value.checkpoint_path)


class TestOutputs:
    def test_exports_and_population_json(self, mini_cfg, tmp_path):
        out = tmp_path / "artifacts"
        result = run_variant("NSLC-HSV", "SP2", mini_cfg, MINI, out_dir=out)
        n = mini_cfg.population_size
        # populations at both interrupts plus the final one
        assert len(result.exported) == 3 * n
        names = {p.rsplit("/", 1)[-1] for p in result.exported}
        assert f"NSLC-HSV_SP2_4_00.ppm" in names
        assert f"NSLC-HSV_SP2_12_{n - 1:02d}.ppm" in names
        assert (out / "metrics.jsonl").exists()
        doc = json.loads((out / "population.json").read_text())
        assert len(doc["population"]) == n
        assert doc["variant"] == "NSLC-HSV"


class TestCompareRuns:
    def test_self_comparison_zero_deltas(self, mini_bsl):
        cmp = compare_runs([mini_bsl.metrics, mini_bsl.metrics])
        for entry in cmp.entries:
            assert entry.delta_fitness == 0.0
            assert entry.delta_hsv == 0.0
            assert entry.delta_vit == 0.0

    def test_cycle_ratios_match_log(self, mini_bsl, mini_hsv):
        cmp = compare_runs([mini_bsl.metrics, mini_hsv.metrics])
        hsv_entry = next(e for e in cmp.entries if e.variant == "NSLC-HSV")
        assert len(hsv_entry.cycles) == 2
        refine_by_iter = {r.refine_iteration: r for r in mini_hsv.metrics.refine_rows()}
        for cycle in hsv_entry.cycles:
            block = [r for r in mini_hsv.metrics.explore_rows() if r.refine_iteration == cycle.iteration]
            pre, post = refine_by_iter[cycle.iteration], block[-1]
            assert cycle.fitness_ratio == pytest.approx(post.mean_fitness / pre.mean_fitness)
            assert cycle.hsv_ratio == pytest.approx(post.mean_hsv_diversity / pre.mean_hsv_diversity)

    def test_mismatched_schedules_rejected(self, mini_cfg, mini_bsl):
        short = run_variant("GAN-BSL", "SP2", mini_cfg, CycleSchedule(6, (), 3))
        with pytest.raises(ValueError):
            compare_runs([mini_bsl.metrics, short.metrics])

    def test_table_renders(self, mini_bsl, mini_hsv):
        text = compare_runs([mini_bsl.metrics, mini_hsv.metrics]).table()
        assert "baseline: GAN-BSL" in text
        assert "NSLC-HSV" in text

    def test_multi_prompt_grouping_and_averages(self, mini_cfg, mini_bsl, mini_hsv):
        bsl_sp1 = run_variant("GAN-BSL", "SP1", mini_cfg, MINI)
        hsv_sp1 = run_variant("NSLC-HSV", "SP1", mini_cfg, MINI)
        cmp = compare_runs(
            [mini_bsl.metrics, mini_hsv.metrics, bsl_sp1.metrics, hsv_sp1.metrics]
        )
        # baseline deltas are per-prompt: every GAN-BSL entry is its own baseline
        for entry in cmp.entries:
            if entry.variant == "GAN-BSL":
                assert entry.delta_fitness == 0.0
        hsv_entries = [e for e in cmp.entries if e.variant == "NSLC-HSV"]
        assert {e.prompt_id for e in hsv_entries} == {"SP1", "SP2"}
        avg = next(a for a in cmp.averages if a.variant == "NSLC-HSV")
        assert avg.n_prompts == 2
        assert avg.delta_fitness == pytest.approx(
            np.mean([e.delta_fitness for e in hsv_entries])
        )
        assert "avg over 2 prompts" in cmp.table()


class TestSelectShowcase:
    def test_everyone_when_n_equals_pop(self, mini_hsv):
        chosen = select_showcase(mini_hsv.population, DistanceMetricKind.HSV, len(mini_hsv.population))
        assert set(map(id, chosen)) == set(map(id, mini_hsv.population))

    def test_duplicates_ranked_last(self, mini_hsv):
        pop = list(mini_hsv.population)
        twin = pop[0].copy()
        pop.append(twin)
        chosen = select_showcase(pop, DistanceMetricKind.EMBEDDING, len(pop) - 2)
        ids = set(map(id, chosen))
        assert id(pop[0]) not in ids and id(twin) not in ids

    def test_stable_across_reruns(self, mini_cfg, mini_hsv):
        again = run_variant("NSLC-HSV", "SP2", mini_cfg, MINI)
        a = select_showcase(mini_hsv.population, DistanceMetricKind.HSV, 5)
        b = select_showcase(again.population, DistanceMetricKind.HSV, 5)
        assert all(np.array_equal(x.genome, y.genome) for x, y in zip(a, b))

    def test_count_validated(self, mini_hsv):
        with pytest.raises(ValueError):
            select_showcase(mini_hsv.population, DistanceMetricKind.HSV, len(mini_hsv.population) + 1)
