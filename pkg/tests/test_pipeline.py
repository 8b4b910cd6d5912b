"""End-to-end pipeline: config round trips, artifacts, reproducibility."""

import json
import os

import pytest

from adforecast.calibrate.mmoe import TrainConfig
from adforecast.pipeline import (PipelineConfig, default_strategy, main,
                                 run_pipeline)
from adforecast.synthlog.logs import LogConfig
from adforecast.synthlog.world import WorldConfig
from adforecast.urf.fm import FmTrainConfig


def tiny_config(out_dir: str, seed: int = 5) -> PipelineConfig:
    return PipelineConfig(
        out_dir=out_dir,
        seed=seed,
        n_train=150,
        n_eval=60,
        urf_events=8000,
        n_experts=2,
        world=WorldConfig(n_users=250, n_tags=24, n_advertisers=6,
                          n_areas=3, n_adzones=3),
        logs=LogConfig(n_requests=1200, sample_rate=0.3),
        urf=FmTrainConfig(k=4, epochs=2),
        calib=TrainConfig(max_epochs=4, patience=2, batch_size=64),
    )


@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory):
    """The same tiny config run twice into different directories."""
    root = tmp_path_factory.mktemp("pipeline")
    results = []
    for name in ("a", "b"):
        config = tiny_config(str(root / name))
        results.append((config, run_pipeline(config)))
    return results


class TestConfigSerialization:
    def test_json_round_trip(self, tmp_path):
        config = tiny_config(str(tmp_path / "x"), seed=9)
        path = str(tmp_path / "config.json")
        config.save(path)
        again = PipelineConfig.load(path)
        assert again == config
        assert isinstance(again.world.behavior_tag_density, tuple)

    def test_partial_dict_uses_defaults(self):
        config = PipelineConfig.from_dict({"seed": 3, "n_train": 600})
        assert config.seed == 3
        assert config.n_train == 600
        assert config.world == WorldConfig()
        assert config.strategy == default_strategy()


class TestArtifacts:
    def test_all_artifacts_written(self, tiny_runs):
        _, result = tiny_runs[0]
        for name, path in result.paths.items():
            assert os.path.exists(path), name
            if name != "logs_dir":
                assert os.path.getsize(path) > 0, name
        assert result.paths["figure"].endswith(".png")
        with open(result.paths["figure"], "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"

    def test_report_covers_all_methods(self, tiny_runs):
        _, result = tiny_runs[0]
        methods = {c.method for c in result.report.cells}
        assert methods == {"REPLAY", "MTL_1", "MTL_N"}
        assert result.report.n_campaigns["total"] == 60

    def test_timings_cover_stages(self, tiny_runs):
        _, result = tiny_runs[0]
        assert set(result.timings) == {"gen-world", "gen-logs", "train-urf",
                                       "build-dataset", "train-calibrator",
                                       "evaluate"}
        assert all(t >= 0 for t in result.timings.values())


class TestReproducibility:
    @pytest.mark.parametrize("artifact", [
        "report_csv", "pearson_csv", "train_dataset", "eval_dataset",
        "mtl_n", "mtl_1", "urf_model",
    ])
    def test_same_seed_same_bytes(self, tiny_runs, artifact):
        (_, first), (_, second) = tiny_runs
        with open(first.paths[artifact], "rb") as fh:
            a = fh.read()
        with open(second.paths[artifact], "rb") as fh:
            b = fh.read()
        assert a == b

    def test_different_seed_changes_report(self, tiny_runs, tmp_path):
        (_, first), _ = tiny_runs
        config = tiny_config(str(tmp_path / "c"), seed=6)
        other = run_pipeline(config)
        with open(first.paths["report_csv"]) as fh:
            a = fh.read()
        with open(other.paths["report_csv"]) as fh:
            b = fh.read()
        assert a != b


class TestMain:
    def test_module_entry_runs_from_json(self, tmp_path, capsys):
        config = tiny_config(str(tmp_path / "run"))
        config.n_train = 60
        config.n_eval = 30
        path = str(tmp_path / "config.json")
        config.save(path)
        assert main([path]) == 0
        out = capsys.readouterr().out
        assert "report.csv" in out
        assert os.path.exists(os.path.join(str(tmp_path / "run"),
                                           "report.csv"))

    def test_out_override(self, tmp_path):
        config = tiny_config(str(tmp_path / "ignored"))
        config.n_train = 60
        config.n_eval = 30
        path = str(tmp_path / "config.json")
        config.save(path)
        target = str(tmp_path / "elsewhere")
        assert main([path, "--out", target]) == 0
        assert os.path.exists(os.path.join(target, "report.csv"))
