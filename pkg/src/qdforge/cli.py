"""Command-line frontend: run, compare, showcase, export-plots, validate-config.

Exit codes: 0 success, 2 invalid config or arguments, 3 sidecar
unreachable when the remote backend was requested, 1 runtime failure (a
checkpoint is preserved when an output directory was given).  Plot output
is data only (CSV series); rendering belongs to external tools.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import ConfigError, EngineConfig, Individual, config_from_json, desk_config, validate_config
from .decoder import generate_codebook, write_ppm
from .evaluation import EvalContext
from .evolve import NoveltyParams
from .imagemetrics import DistanceMetricKind
from .metrics import RunMetrics, export_plot_series, series_to_csv
from .oracle import RemoteOracle, SyntheticOracle
from .orchestrator import (
    CycleSchedule,
    RunFailure,
    VARIANTS,
    compare_runs,
    desk_schedule,
    full_schedule,
    run_variant,
    sanitize_for_filename,
    select_showcase,
)
from .refine import RefineParams
from .sidecar_client import SidecarClient, SidecarUnavailable
from .core import derive_stream

SIDECAR_URL_ENV = "QDFORGE_SIDECAR_URL"

_METRIC_NAMES = {"hsv": DistanceMetricKind.HSV, "vit": DistanceMetricKind.EMBEDDING}


def _load_config(args) -> tuple[EngineConfig, CycleSchedule, RefineParams, NoveltyParams, dict]:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg, extras = config_from_json(fh.read())
        schedule = CycleSchedule(
            total_refine_iters=extras.get("total_refine_iters", 600),
            interrupt_at=tuple(extras.get("interrupt_at", (100, 200, 300, 400))),
            nslc_generations=extras.get("nslc_generations", 50),
        )
    elif args.preset == "full":
        cfg, schedule, extras = EngineConfig(), full_schedule(), {}
    else:
        cfg, schedule, extras = desk_config(), desk_schedule(), {}
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(master_seed=args.seed)
    problems = validate_config(cfg) + schedule.validate()
    if problems:
        raise ConfigError(problems)
    try:
        refine_params = RefineParams(
            iterations=schedule.total_refine_iters,
            positions_per_step=extras.get("refine.positions_per_step", 8),
            candidates_per_position=extras.get("refine.candidates_per_position", 16),
        )
        refine_params.validate(cfg.codebook_size)
        novelty_params = NoveltyParams(
            k=extras.get("nslc.k", 15),
            e=extras.get("nslc.e", 3),
            generations=schedule.nslc_generations,
            mutation_rate=extras.get("nslc.mutation_rate", 0.05),
        )
    except ValueError as err:
        raise ConfigError([str(err)]) from err
    return cfg, schedule, refine_params, novelty_params, extras


def _build_backends(extras: dict):
    backend = extras.get("oracle.backend", "synthetic")
    if backend not in ("synthetic", "remote"):
        raise ConfigError([f"oracle.backend must be synthetic or remote, got {backend!r}"])
    refine_backend = extras.get("refine.backend", backend)
    if refine_backend != backend:
        raise ConfigError(["refine.backend must match oracle.backend"])
    if backend == "synthetic":
        return SyntheticOracle(), "synthetic", "local", None
    url = os.environ.get(SIDECAR_URL_ENV) or extras.get("oracle.sidecar_url")
    if not url:
        raise ConfigError(
            [f"remote backend needs oracle.sidecar_url or ${SIDECAR_URL_ENV}"]
        )
    client = SidecarClient(url)
    client.health()  # fail fast with exit 3 when the sidecar is down
    oracle = RemoteOracle(client, max_in_flight=extras.get("oracle.max_in_flight", 4))
    return oracle, "remote", "remote", client


def _cmd_run(args) -> int:
    cfg, schedule, refine_params, novelty_params, extras = _load_config(args)
    variant = args.variant or extras.get("variant")
    if not variant:
        raise ConfigError(["no variant given (flag --variant or config key)"])
    if variant not in VARIANTS:
        raise ConfigError(
            [f"unknown variant {variant!r}; valid names: {', '.join(sorted(VARIANTS))}"]
        )
    prompt = args.prompt or extras.get("prompt")
    if not prompt:
        raise ConfigError(["no prompt given (flag --prompt or config key)"])
    oracle, embed_backend, refine_backend, client = _build_backends(extras)
    result = run_variant(
        variant,
        prompt,
        cfg,
        schedule,
        refine_params=refine_params,
        novelty_params=novelty_params,
        oracle=oracle,
        embed_backend=embed_backend,
        refine_backend=refine_backend,
        client=client,
        out_dir=args.out,
        timings=args.timings,
        resume_from=args.resume,
    )
    final = result.metrics.refine_rows()[-1]
    print(
        f"{variant} {prompt!r} seed={cfg.master_seed}: "
        f"{len(result.metrics.rows)} rows, final mean fitness {final.mean_fitness:.5f}"
    )
    if args.out:
        print(f"outputs in {args.out}")
    return 0


def _read_logs(paths) -> list[RunMetrics]:
    if not paths:
        raise ConfigError(["no metrics logs given"])
    logs = []
    for p in paths:
        try:
            logs.append(RunMetrics.read_jsonl(p))
        except (OSError, json.JSONDecodeError, TypeError) as err:
            raise ConfigError([f"cannot read metrics log {p}: {err}"]) from err
    return logs


def _cmd_compare(args) -> int:
    logs = _read_logs(args.log)
    try:
        comparison = compare_runs(logs)
    except ValueError as err:
        raise ConfigError([str(err)]) from err
    print(comparison.table())
    return 0


def _cmd_export_plots(args) -> int:
    logs = _read_logs(args.log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for log in logs:
        if not log.rows:
            raise ConfigError(["metrics log is empty"])
        head = log.rows[0]
        series = export_plot_series(log)
        for metric, points in series.items():
            name = f"{head.variant}_{sanitize_for_filename(head.prompt_id)}_{metric}.csv"
            path = out / name
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(series_to_csv(points))
            written.append(str(path))
    for path in written:
        print(path)
    return 0


def _cmd_showcase(args) -> int:
    pop_path = Path(args.run_dir) / "population.json"
    try:
        with open(pop_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError([f"cannot read {pop_path}: {err}"]) from err
    cfg = EngineConfig(**doc["config"])
    book = generate_codebook(cfg, derive_stream(cfg.master_seed, "codebook"))
    ctx = EvalContext(cfg=cfg, book=book)
    prompt = SyntheticOracle().prompt_vector(doc["prompt_id"])
    pop = []
    for entry in doc["population"]:
        ind = Individual(genome=np.asarray(entry["genome"], dtype=np.int64))
        ind.fitness = entry["fitness"]
        ctx.evaluate(ind, prompt)
        pop.append(ind)
    chosen = select_showcase(pop, _METRIC_NAMES[args.metric], args.count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rank, ind in enumerate(chosen):
        path = out / f"showcase_{args.metric}_{rank:02d}.ppm"
        write_ppm(ind.phenotype, path)
        print(f"{path} fitness={ind.fitness:.5f}")
    return 0


def _cmd_validate_config(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg, extras = config_from_json(fh.read())
    except OSError as err:
        raise ConfigError([f"cannot read {args.config}: {err}"]) from err
    except json.JSONDecodeError as err:
        raise ConfigError([f"config is not valid JSON: {err}"]) from err
    print(f"OK: genome length {cfg.genome_length}, image {cfg.image_width}x{cfg.image_height}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdforge")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment variant")
    run.add_argument("--config", help="flat JSON config file")
    run.add_argument("--preset", choices=("desk", "full"), default="desk")
    run.add_argument("--variant", choices=sorted(VARIANTS))
    run.add_argument("--prompt", help="SP1..SP5 preset or free text")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory (metrics, images, checkpoint)")
    run.add_argument("--timings", action="store_true", help="include wall_ms in the JSONL log")
    run.add_argument("--resume", help="checkpoint file from a failed run")
    run.set_defaults(func=_cmd_run)

    compare = sub.add_parser("compare", help="summarize logs against the GAN baseline")
    compare.add_argument("--log", nargs="+", default=[])
    compare.set_defaults(func=_cmd_compare)

    plots = sub.add_parser("export-plots", help="emit CSV series per metric per log")
    plots.add_argument("--log", nargs="+", default=[])
    plots.add_argument("--out", required=True)
    plots.set_defaults(func=_cmd_export_plots)

    showcase = sub.add_parser("showcase", help="export the most locally-novel individuals")
    showcase.add_argument("--run-dir", required=True, help="directory written by `run --out`")
    showcase.add_argument("--metric", choices=sorted(_METRIC_NAMES), default="hsv")
    showcase.add_argument("-n", "--count", type=int, default=5)
    showcase.add_argument("--out", required=True)
    showcase.set_defaults(func=_cmd_showcase)

    validate = sub.add_parser("validate-config", help="check a config file")
    validate.add_argument("--config", required=True)
    validate.set_defaults(func=_cmd_validate_config)

    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as err:
        for problem in err.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 2
    except SidecarUnavailable as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except RunFailure as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # runtime failure
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
