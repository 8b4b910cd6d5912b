"""One-config orchestration: world to benchmark report in a single call.

PipelineConfig collects every stage's parameters plus one master seed; each
stage runs on a fixed offset of that seed, so two runs from the same config
produce byte-identical artifacts. `python3 -m adforecast.pipeline
config.json` runs it from a JSON file; run_pipeline is the library entry.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .calibrate.features import build_calib_input
from .calibrate.forecast import train_calibrator
from .calibrate.mmoe import TrainConfig
from .dataset import build_full_index, build_rows
from .evaluation.benchmark import (EvalReport, benchmark, model_forecaster,
                                   write_dataset, write_pearson_csv,
                                   write_report_csv, write_report_md)
from .evaluation.figures import render_benchmark_figure
from .synthlog.io import (WORLD_FILE, LogManifest, logs_dir_paths,
                          write_auction_log, write_manifest, write_urf_log,
                          write_uts_log, write_world, uts_rows_from_world)
from .synthlog.logs import LogConfig, gen_day_logs
from .synthlog.simulator import StrategyConfig
from .synthlog.world import WorldConfig, gen_world
from .urf.features import gen_action_log
from .urf.fm import FmTrainConfig
from .urf.model import emit_urf_log, train_urf

# Benchmark strategy: the deviation knobs the shipped defaults run with.
# Values are tuned so the synthetic benchmark reproduces the directional
# results (replay overshoots severely, calibration recovers most of it).
STRATEGY_DEFAULTS: Dict[str, object] = {
    "boost_profile": 0.05,
    "boost_behavior": 0.30,
    "boost_mixed": 0.15,
    "pctr_shift": 1.25,
    "pacing_jitter": 0.12,
    "pacing_depth": 0.85,
    "price_drift": 0.18,
    "render_loss": 0.45,
    "tier_throttle": 0.50,
    "campaign_noise": 0.08,
    "world_clicks": False,
    "strategy_seed": 0,
}


def default_strategy() -> StrategyConfig:
    """The benchmark's deviation configuration (see STRATEGY_DEFAULTS)."""
    d = STRATEGY_DEFAULTS
    return StrategyConfig(
        parallel_retrieval_boost={"profile": float(d["boost_profile"]),
                                  "behavior": float(d["boost_behavior"]),
                                  "mixed": float(d["boost_mixed"])},
        pctr_calibration_shift=float(d["pctr_shift"]),
        pacing_jitter=float(d["pacing_jitter"]),
        pacing_depth=float(d["pacing_depth"]),
        price_drift=float(d["price_drift"]),
        render_loss=float(d["render_loss"]),
        tier_throttle=float(d["tier_throttle"]),
        campaign_noise=float(d["campaign_noise"]),
        world_click_model=bool(d["world_clicks"]),
        seed=int(d["strategy_seed"]))


@dataclass
class PipelineConfig:
    """Everything one end-to-end run needs, JSON-serializable.

    The master seed drives every stage at a fixed offset: world +0,
    logs +1, action log +2, URF training +3, training campaigns +4,
    evaluation campaigns +5, calibrator training +6.
    """

    out_dir: str = "artifacts"
    seed: int = 1
    n_train: int = 5000
    n_eval: int = 1500
    urf_events: int = 200000
    scale_factor: Optional[float] = None  # None: 1 / logs.sample_rate
    n_experts: int = 6
    world: WorldConfig = field(default_factory=WorldConfig)
    logs: LogConfig = field(default_factory=LogConfig)
    urf: FmTrainConfig = field(default_factory=FmTrainConfig)
    strategy: StrategyConfig = field(default_factory=default_strategy)
    calib: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        obj = dict(obj)
        nested = {"world": WorldConfig, "logs": LogConfig,
                  "urf": FmTrainConfig, "strategy": StrategyConfig,
                  "calib": TrainConfig}
        kwargs = {}
        for name, value in obj.items():
            if name in nested:
                sub = dict(value)
                if name == "world" and "behavior_tag_density" in sub:
                    sub["behavior_tag_density"] = tuple(
                        sub["behavior_tag_density"])
                kwargs[name] = nested[name](**sub)
            else:
                kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class PipelineResult:
    report: EvalReport
    paths: Dict[str, str]
    timings: Dict[str, float]


def run_pipeline(config: PipelineConfig,
                 echo=lambda msg: None) -> PipelineResult:
    """Run world -> logs -> URF -> datasets -> calibrators -> report.

    Writes all artifacts under config.out_dir and returns the benchmark
    report with per-stage wall times.
    """
    out = config.out_dir
    logs_dir = os.path.join(out, "logs")
    os.makedirs(logs_dir, exist_ok=True)
    paths = logs_dir_paths(logs_dir)
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()

    def mark(stage: str) -> None:
        nonlocal t0
        now = time.perf_counter()
        timings[stage] = now - t0
        t0 = now
        echo(f"{stage}: {timings[stage]:.1f}s")

    world = gen_world(config.world, config.seed)
    write_world(os.path.join(logs_dir, WORLD_FILE), world)
    mark("gen-world")

    records = gen_day_logs(world, config.logs, config.seed + 1)
    manifest = LogManifest(log_date=config.logs.log_date,
                           n_requests=config.logs.n_requests,
                           sample_rate=config.logs.sample_rate,
                           seed=config.seed + 1)
    write_auction_log(paths["auction"], records)
    write_uts_log(paths["uts"], uts_rows_from_world(world))
    write_manifest(paths["manifest"], manifest)
    mark("gen-logs")

    actions = gen_action_log(world, config.urf_events, config.seed + 2)
    urf_model = train_urf(world, actions, config.urf, config.seed + 3)
    urf_model.save(os.path.join(out, "urf.json"))
    write_urf_log(paths["urf"], emit_urf_log(world, urf_model, records))
    mark("train-urf")

    index = build_full_index(world, records, urf_model, manifest=manifest)
    scale = config.scale_factor
    if scale is None:
        rate = config.logs.sample_rate
        scale = 1.0 / rate if rate > 0 else 1.0
    train_rows = build_rows(world, index, config.strategy, config.n_train,
                            seed=config.seed + 4, scale_factor=scale,
                            id_prefix="t")
    eval_rows = build_rows(world, index, config.strategy, config.n_eval,
                           seed=config.seed + 5, scale_factor=scale,
                           id_prefix="e")
    write_dataset(os.path.join(out, "train.ndjson"), train_rows)
    write_dataset(os.path.join(out, "eval.ndjson"), eval_rows)
    mark("build-dataset")

    inputs = [build_calib_input(r.criteria, r.replay) for r in train_rows]
    labels = np.array([[r.truth.impression, r.truth.click, r.truth.cost]
                       for r in train_rows])
    mtl_n = train_calibrator(inputs, labels, kind="mmoe",
                             train_config=config.calib,
                             n_experts=config.n_experts,
                             seed=config.seed + 6)
    mtl_1 = train_calibrator(inputs, labels, kind="single",
                             train_config=config.calib,
                             n_experts=config.n_experts,
                             seed=config.seed + 6)
    mtl_n.save(os.path.join(out, "mtl_n.json"))
    mtl_1.save(os.path.join(out, "mtl_1.json"))
    mark("train-calibrator")

    report = benchmark(eval_rows,
                       methods={"REPLAY": None,
                                "MTL_1": model_forecaster(mtl_1),
                                "MTL_N": model_forecaster(mtl_n)},
                       train_ids={r.campaign_id for r in train_rows})
    write_report_csv(report, os.path.join(out, "report.csv"))
    write_report_md(report, os.path.join(out, "report.md"))
    write_pearson_csv(report, os.path.join(out, "pearson.csv"))
    render_benchmark_figure(report, os.path.join(out, "accuracy.png"))
    mark("evaluate")

    artifact_paths = {
        "logs_dir": logs_dir,
        "urf_model": os.path.join(out, "urf.json"),
        "train_dataset": os.path.join(out, "train.ndjson"),
        "eval_dataset": os.path.join(out, "eval.ndjson"),
        "mtl_n": os.path.join(out, "mtl_n.json"),
        "mtl_1": os.path.join(out, "mtl_1.json"),
        "report_csv": os.path.join(out, "report.csv"),
        "report_md": os.path.join(out, "report.md"),
        "pearson_csv": os.path.join(out, "pearson.csv"),
        "figure": os.path.join(out, "accuracy.png"),
    }
    return PipelineResult(report=report, paths=artifact_paths,
                          timings=timings)


def main(argv: Optional[list] = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        prog="python3 -m adforecast.pipeline",
        description="Run the full forecasting pipeline from a JSON config.")
    parser.add_argument("config", nargs="?", default=None,
                        help="PipelineConfig JSON; defaults apply if omitted")
    parser.add_argument("--out", default=None,
                        help="override the config's out_dir")
    args = parser.parse_args(argv)
    config = (PipelineConfig.load(args.config) if args.config
              else PipelineConfig())
    if args.out:
        config.out_dir = args.out
    result = run_pipeline(config, echo=print)
    total = sum(result.timings.values())
    print(f"total: {total:.1f}s; report at {result.paths['report_csv']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
