"""Command-line pipeline: world generation through benchmark and serving.

Every subcommand is a thin wrapper over one library operation. Runtime
failures surface as a one-line diagnostic with exit status 1; usage errors
exit 2 (click's default).
"""

from __future__ import annotations

import functools
import json
import os
import sys
from typing import Optional

import click
import numpy as np

from .calibrate.features import build_calib_input
from .calibrate.forecast import CalibModel, train_calibrator
from .calibrate.mmoe import TrainConfig
from .dataset import SamplerConfig, build_full_index, build_rows
from .errors import AdforecastError
from .evaluation.benchmark import (benchmark, disturbance_sweep,
                                   model_forecaster, read_dataset,
                                   write_dataset, write_disturbance_csv,
                                   write_pearson_csv, write_report_csv,
                                   write_report_md)
from .evaluation.figures import (render_benchmark_figure,
                                 render_disturbance_figure)
from .pipeline import STRATEGY_DEFAULTS
from .replay.criteria import criteria_from_dict
from .replay.engine import LogIndex, replay
from .synthlog.io import (MANIFEST_FILE, WORLD_FILE, LogManifest,
                          logs_dir_paths, read_auction_log, read_world,
                          write_auction_log, write_manifest, write_urf_log,
                          write_uts_log, write_world, uts_rows_from_world)
from .synthlog.logs import LogConfig, gen_day_logs
from .synthlog.simulator import StrategyConfig
from .synthlog.world import WorldConfig, gen_world
from .urf.features import gen_action_log
from .urf.fm import FmTrainConfig, evaluate_urf
from .urf.model import UrfModel, emit_urf_log, train_urf


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AdforecastError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


@click.group()
def main() -> None:
    """Campaign performance forecasting pipeline."""


@main.command("gen-world")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Directory for world.json.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--n-users", default=1000, show_default=True, type=int)
@click.option("--n-tags", default=50, show_default=True, type=int)
@click.option("--n-advertisers", default=20, show_default=True, type=int)
@click.option("--n-areas", default=8, show_default=True, type=int)
@click.option("--n-adzones", default=6, show_default=True, type=int)
@click.option("--target-ctr", default=0.04, show_default=True, type=float)
@click.option("--target-cvr", default=0.08, show_default=True, type=float)
@_guarded
def cmd_gen_world(out: str, seed: int, n_users: int, n_tags: int,
                  n_advertisers: int, n_areas: int, n_adzones: int,
                  target_ctr: float, target_cvr: float) -> None:
    """Generate the synthetic population and response model."""
    config = WorldConfig(n_users=n_users, n_tags=n_tags,
                         n_advertisers=n_advertisers, n_areas=n_areas,
                         n_adzones=n_adzones, target_ctr=target_ctr,
                         target_cvr=target_cvr)
    world = gen_world(config, seed)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, WORLD_FILE)
    write_world(path, world)
    click.echo(f"wrote {path}: {n_users} users, {n_tags} tags, "
               f"{n_advertisers} advertisers")


@main.command("gen-logs")
@click.option("--world", "world_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Logs directory (auction/uts ndjson + manifest).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--n-requests", default=20000, show_default=True, type=int)
@click.option("--sample-rate", default=0.25, show_default=True, type=float)
@click.option("--base-ecpm", default=6.0, show_default=True, type=float)
@click.option("--log-date", default="2026-01-01", show_default=True)
@_guarded
def cmd_gen_logs(world_path: str, out: str, seed: int, n_requests: int,
                 sample_rate: float, base_ecpm: float, log_date: str) -> None:
    """Generate one day of auction logs plus the tag-membership log."""
    world = read_world(world_path)
    config = LogConfig(n_requests=n_requests, sample_rate=sample_rate,
                       base_ecpm=base_ecpm, log_date=log_date)
    records = gen_day_logs(world, config, seed)
    os.makedirs(out, exist_ok=True)
    paths = logs_dir_paths(out)
    write_auction_log(paths["auction"], records)
    write_uts_log(paths["uts"], uts_rows_from_world(world))
    write_manifest(paths["manifest"], LogManifest(
        log_date=log_date, n_requests=n_requests, sample_rate=sample_rate,
        seed=seed))
    n_sampled = sum(1 for r in records if r.sampled)
    click.echo(f"wrote {n_requests} auctions to {out} "
               f"({n_sampled} in the sampled bucket)")


@main.command("train-urf")
@click.option("--world", "world_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--n-events", default=200000, show_default=True, type=int)
@click.option("--epochs", default=20, show_default=True, type=int)
@click.option("--k", default=8, show_default=True, type=int,
              help="Factorization rank.")
@_guarded
def cmd_train_urf(world_path: str, out: str, seed: int, n_events: int,
                  epochs: int, k: int) -> None:
    """Train the user response forecaster on a sampled action log."""
    world = read_world(world_path)
    config = FmTrainConfig(k=k, epochs=epochs)
    actions = gen_action_log(world, n_events, seed)
    model = train_urf(world, actions, config, seed)
    holdout = gen_action_log(world, max(n_events // 10, 1000), seed + 1,
                             vocab=model.vocab)
    scores, _ = model.predict(holdout.idx, holdout.dense)
    result = evaluate_urf(scores, holdout.click)
    model.save(out)
    click.echo(f"wrote {out} (version {model.version}); holdout click "
               f"auc {result.auc:.4f}, logloss {result.logloss:.4f}")


@main.command("emit-urf")
@click.option("--world", "world_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--logs", "logs_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@_guarded
def cmd_emit_urf(world_path: str, model_path: str, logs_dir: str) -> None:
    """Score all sampled requests and write the URF log."""
    world = read_world(world_path)
    model = UrfModel.load(model_path)
    paths = logs_dir_paths(logs_dir)
    records = read_auction_log(paths["auction"])
    rows = emit_urf_log(world, model, records)
    write_urf_log(paths["urf"], rows)
    click.echo(f"wrote {len(rows)} URF rows to {paths['urf']}")


def _strategy_options(fn):
    d = STRATEGY_DEFAULTS
    fn = click.option("--strategy-seed", default=d["strategy_seed"],
                      show_default=True, type=int)(fn)
    fn = click.option("--world-clicks/--urf-clicks", "world_clicks",
                      default=d["world_clicks"], show_default=True,
                      help="Count true clicks from the world's click model "
                           "or from the logged URF scores.")(fn)
    fn = click.option("--campaign-noise", default=d["campaign_noise"],
                      show_default=True, type=float)(fn)
    fn = click.option("--tier-throttle", default=d["tier_throttle"],
                      show_default=True, type=float)(fn)
    fn = click.option("--render-loss", default=d["render_loss"],
                      show_default=True, type=float)(fn)
    fn = click.option("--price-drift", default=d["price_drift"],
                      show_default=True, type=float)(fn)
    fn = click.option("--pacing-depth", default=d["pacing_depth"],
                      show_default=True, type=float)(fn)
    fn = click.option("--pacing-jitter", default=d["pacing_jitter"],
                      show_default=True, type=float)(fn)
    fn = click.option("--pctr-shift", default=d["pctr_shift"],
                      show_default=True, type=float)(fn)
    fn = click.option("--boost-mixed", default=d["boost_mixed"],
                      show_default=True, type=float)(fn)
    fn = click.option("--boost-behavior", default=d["boost_behavior"],
                      show_default=True, type=float)(fn)
    fn = click.option("--boost-profile", default=d["boost_profile"],
                      show_default=True, type=float)(fn)
    return fn


@main.command("build-dataset")
@click.option("--world", "world_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--logs", "logs_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--urf-model", "urf_model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--n-campaigns", default=1000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--scale-factor", default=None, type=float,
              help="Defaults to 1/sample_rate from the logs manifest.")
@click.option("--id-prefix", default="c", show_default=True)
@_strategy_options
@_guarded
def cmd_build_dataset(world_path: str, logs_dir: str, urf_model_path: str,
                      out: str, n_campaigns: int, seed: int,
                      scale_factor: Optional[float], id_prefix: str,
                      boost_profile: float, boost_behavior: float,
                      boost_mixed: float, pctr_shift: float,
                      pacing_jitter: float, pacing_depth: float,
                      price_drift: float, render_loss: float,
                      tier_throttle: float, campaign_noise: float,
                      world_clicks: bool, strategy_seed: int) -> None:
    """Sample campaigns; record replay forecasts and true delivery."""
    world = read_world(world_path)
    model = UrfModel.load(urf_model_path)
    paths = logs_dir_paths(logs_dir)
    records = read_auction_log(paths["auction"])
    manifest = None
    if os.path.exists(paths["manifest"]):
        from .synthlog.io import read_manifest
        manifest = read_manifest(paths["manifest"])
    index = build_full_index(world, records, model, manifest=manifest)
    if scale_factor is None:
        rate = manifest.sample_rate if manifest else 1.0
        scale_factor = 1.0 / rate if rate > 0 else 1.0
    strategy = StrategyConfig(
        parallel_retrieval_boost={"profile": boost_profile,
                                  "behavior": boost_behavior,
                                  "mixed": boost_mixed},
        pctr_calibration_shift=pctr_shift,
        pacing_jitter=pacing_jitter,
        pacing_depth=pacing_depth,
        price_drift=price_drift,
        render_loss=render_loss,
        tier_throttle=tier_throttle,
        campaign_noise=campaign_noise,
        world_click_model=world_clicks,
        seed=strategy_seed)
    rows = build_rows(world, index, strategy, n_campaigns, seed,
                      scale_factor, id_prefix=id_prefix)
    write_dataset(out, rows)
    click.echo(f"wrote {len(rows)} campaigns to {out} "
               f"(scale factor {scale_factor:g})")


@main.command("replay")
@click.option("--criteria", "criteria_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--logs", "logs_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--scale-factor", default=None, type=float,
              help="Defaults to 1/sample_rate from the logs manifest.")
@_guarded
def cmd_replay(criteria_path: str, logs_dir: str,
               scale_factor: Optional[float]) -> None:
    """Replay one campaign and print the forecast as JSON."""
    with open(criteria_path, "r", encoding="utf-8") as fh:
        criteria = criteria_from_dict(json.load(fh))
    index = LogIndex.from_dir(logs_dir)
    if scale_factor is None:
        rate = index.manifest.sample_rate if index.manifest else 1.0
        scale_factor = 1.0 / rate if rate > 0 else 1.0
    result = replay(criteria, index, scale_factor)
    click.echo(json.dumps(result.to_dict(), indent=2, sort_keys=True))


def _dataset_to_training(rows):
    inputs = [build_calib_input(r.criteria, r.replay) for r in rows]
    labels = np.array([[r.truth.impression, r.truth.click, r.truth.cost]
                       for r in rows])
    return inputs, labels


@main.command("train-calibrator")
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--kind", default="mmoe", show_default=True,
              type=click.Choice(["mmoe", "single"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--epochs", default=200, show_default=True, type=int)
@click.option("--experts", default=6, show_default=True, type=int)
@click.option("--batch-size", default=256, show_default=True, type=int)
@_guarded
def cmd_train_calibrator(dataset_path: str, out: str, kind: str, seed: int,
                         epochs: int, experts: int, batch_size: int) -> None:
    """Fit the calibration model on a campaign dataset."""
    rows = read_dataset(dataset_path)
    inputs, labels = _dataset_to_training(rows)
    config = TrainConfig(max_epochs=epochs, batch_size=batch_size)
    model = train_calibrator(inputs, labels, kind=kind, train_config=config,
                             n_experts=experts, seed=seed)
    model.save(out)
    click.echo(f"wrote {out} (version {model.version}, kind {kind}, "
               f"{len(rows)} campaigns)")


@main.command("evaluate")
@click.option("--train-dataset", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--eval-dataset", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--epochs", default=200, show_default=True, type=int)
@click.option("--experts", default=6, show_default=True, type=int)
@_guarded
def cmd_evaluate(train_dataset: str, eval_dataset: str, out_dir: str,
                 seed: int, epochs: int, experts: int) -> None:
    """Train both calibrators, score all methods, write the report."""
    train_rows = read_dataset(train_dataset)
    eval_rows = read_dataset(eval_dataset)
    inputs, labels = _dataset_to_training(train_rows)
    config = TrainConfig(max_epochs=epochs)
    mtl_n = train_calibrator(inputs, labels, kind="mmoe",
                             train_config=config, n_experts=experts,
                             seed=seed)
    mtl_1 = train_calibrator(inputs, labels, kind="single",
                             train_config=config, n_experts=experts,
                             seed=seed)
    report = benchmark(
        eval_rows,
        methods={"REPLAY": None,
                 "MTL_1": model_forecaster(mtl_1),
                 "MTL_N": model_forecaster(mtl_n)},
        train_ids={r.campaign_id for r in train_rows})
    os.makedirs(out_dir, exist_ok=True)
    mtl_n.save(os.path.join(out_dir, "mtl_n.json"))
    mtl_1.save(os.path.join(out_dir, "mtl_1.json"))
    write_report_csv(report, os.path.join(out_dir, "report.csv"))
    write_report_md(report, os.path.join(out_dir, "report.md"))
    write_pearson_csv(report, os.path.join(out_dir, "pearson.csv"))
    render_benchmark_figure(report, os.path.join(out_dir, "accuracy.png"))
    lines = [f"wrote report files to {out_dir}"]
    if report.bcb_budget_mape is not None:
        lines.append(f"BCB budget-bound cost mape: "
                     f"{report.bcb_budget_mape:.4f}")
    click.echo("\n".join(lines))


@main.command("disturb")
@click.option("--eval-dataset", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--logs", "logs_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--scale-factor", default=None, type=float)
@_guarded
def cmd_disturb(eval_dataset: str, logs_dir: str, model_path: str,
                out_dir: str, scale_factor: Optional[float]) -> None:
    """Sweep a multiplicative pctr disturbance and record accuracy."""
    rows = read_dataset(eval_dataset)
    index = LogIndex.from_dir(logs_dir)
    model = CalibModel.load(model_path)
    if scale_factor is None:
        rate = index.manifest.sample_rate if index.manifest else 1.0
        scale_factor = 1.0 / rate if rate > 0 else 1.0
    points = disturbance_sweep(rows, index, model,
                               scale_factor=scale_factor)
    os.makedirs(out_dir, exist_ok=True)
    write_disturbance_csv(points, os.path.join(out_dir, "disturbance.csv"))
    render_disturbance_figure(points,
                              os.path.join(out_dir, "disturbance.png"))
    click.echo(f"wrote disturbance sweep to {out_dir}")


@main.command("run")
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="PipelineConfig JSON; defaults apply if omitted.")
@click.option("--out", default=None,
              help="Override the config's output directory.")
@_guarded
def cmd_run(config_path: Optional[str], out: Optional[str]) -> None:
    """Run the whole pipeline: world, logs, URF, datasets, models, report."""
    from .pipeline import PipelineConfig, run_pipeline

    config = (PipelineConfig.load(config_path) if config_path
              else PipelineConfig())
    if out:
        config.out_dir = out
    result = run_pipeline(config, echo=click.echo)
    total = sum(result.timings.values())
    click.echo(f"total: {total:.1f}s; report at {result.paths['report_csv']}")


@main.command("serve")
@click.option("--logs-dir", required=True, envvar="LOGS_DIR",
              type=click.Path(exists=True, file_okay=False))
@click.option("--model", "model_path", required=True, envvar="MODEL",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--urf-model", "urf_model_path", default=None,
              envvar="URF_MODEL",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--port", default=8080, show_default=True, envvar="PORT",
              type=int)
@click.option("--scale-factor", default=None, envvar="SCALE_FACTOR",
              type=float)
@_guarded
def cmd_serve(logs_dir: str, model_path: str, urf_model_path: Optional[str],
              port: int, scale_factor: Optional[float]) -> None:
    """Serve forecasts over HTTP (POST /forecast, GET /health, GET /meta)."""
    from .service.app import serve
    serve(logs_dir, model_path, urf_model_path, port, scale_factor)


if __name__ == "__main__":
    main()
