"""Calibrated forecasts: wrap trained networks with their input encoding.

Two calibrator kinds share one file format and forecasting interface:
"mmoe" holds a single multi-task network; "single" holds one per-indicator
network trained in isolation (the per-task ablation baseline). For budget
constrained bidding the cost output bypasses the model entirely: such
campaigns spend their budget, so the forecast cost is min(budget, replayed
cost), uncalibrated.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import SchemaError
from ..replay.criteria import BiddingType, CampaignCriteria
from ..replay.engine import ReplayResult
from .features import (CalibInput, N_INPUTS, build_calib_input, dense_stats,
                       encode)
from .mmoe import MmoeConfig, MmoeNet, TrainConfig, train_net

SCHEMA = "adforecast.calib_model/1"
TASKS = ("impression", "click", "cost")


@dataclass
class CalibratedForecast:
    impression: float
    click: float
    cost: float

    def to_dict(self) -> dict:
        return vars(self).copy()


@dataclass
class CalibModel:
    kind: str                      # "mmoe" or "single"
    dense_mean: np.ndarray
    dense_std: np.ndarray
    nets: Dict[str, MmoeNet]       # mmoe: {"all": net}; single: one per task
    version: str = ""

    def forecast_vector(self, calib_input: CalibInput) -> np.ndarray:
        """Calibrated (impression, click, cost), before any passthrough."""
        x = encode(calib_input, self.dense_mean, self.dense_std)
        if self.kind == "mmoe":
            return self.nets["all"].predict(x)[0]
        out = np.empty(len(TASKS))
        for i, task in enumerate(TASKS):
            out[i] = self.nets[task].predict(x)[0, 0]
        return out

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "version": self.version,
            "tasks": list(TASKS),
            "dense_mean": self.dense_mean.tolist(),
            "dense_std": self.dense_std.tolist(),
            "nets": {name: net.to_dict() for name, net in self.nets.items()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CalibModel":
        if obj.get("schema") != SCHEMA:
            raise SchemaError(
                f"not a calibration model file (schema {obj.get('schema')!r})")
        return cls(
            kind=str(obj["kind"]),
            dense_mean=np.asarray(obj["dense_mean"], dtype=np.float64),
            dense_std=np.asarray(obj["dense_std"], dtype=np.float64),
            nets={name: MmoeNet.from_dict(d)
                  for name, d in obj["nets"].items()},
            version=str(obj.get("version", "")),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"), sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "CalibModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def calibrate_forecast(model: CalibModel, criteria: CampaignCriteria,
                       replay_result: ReplayResult) -> CalibratedForecast:
    """Model-calibrated forecast with the BCB cost passthrough."""
    vec = model.forecast_vector(build_calib_input(criteria, replay_result))
    cost = float(vec[2])
    if criteria.bidding_type is BiddingType.BCB:
        cost = min(criteria.budget, replay_result.cost)
    return CalibratedForecast(impression=float(vec[0]), click=float(vec[1]),
                              cost=cost)


def _version_of(nets: Dict[str, MmoeNet]) -> str:
    blob = json.dumps({k: n.to_dict() for k, n in nets.items()},
                      sort_keys=True)
    return "calib-" + hashlib.sha1(blob.encode()).hexdigest()[:10]


def train_calibrator(inputs: Sequence[CalibInput], labels: np.ndarray,
                     kind: str = "mmoe",
                     train_config: Optional[TrainConfig] = None,
                     n_experts: int = 6, expert_hidden: int = 64,
                     tower_hidden: int = 32, seed: int = 0) -> CalibModel:
    """Fit a calibrator on (input, truth-label) pairs.

    Labels are (n, 3) true (impression, click, cost). A deterministic
    validation split drives early stopping on validation loss.
    kind="single" trains one single-task network per indicator with the
    same architecture and budget.
    """
    if kind not in ("mmoe", "single"):
        raise ValueError(f"unknown calibrator kind {kind!r}")
    train_config = train_config or TrainConfig()
    labels = np.asarray(labels, dtype=np.float64)
    mean, std = dense_stats(inputs)
    X = encode(list(inputs), mean, std)

    rng = np.random.default_rng(seed)
    n = len(X)
    order = rng.permutation(n)
    n_val = max(1, int(round(train_config.val_fraction * n)))
    val_rows, train_rows = order[:n_val], order[n_val:]
    if len(train_rows) < 2:
        train_rows = order
    Xt, Yt = X[train_rows], labels[train_rows]
    Xv, Yv = X[val_rows], labels[val_rows]

    nets: Dict[str, MmoeNet] = {}
    if kind == "mmoe":
        config = MmoeConfig(n_inputs=X.shape[1], n_tasks=len(TASKS),
                            n_experts=n_experts, expert_hidden=expert_hidden,
                            tower_hidden=tower_hidden)
        net = MmoeNet(config, np.random.default_rng(seed + 1))
        net, _ = train_net(net, Xt, Yt, train_config, seed + 2, Xv, Yv)
        nets["all"] = net
    else:
        for i, task in enumerate(TASKS):
            config = MmoeConfig(n_inputs=X.shape[1], n_tasks=1,
                                n_experts=n_experts,
                                expert_hidden=expert_hidden,
                                tower_hidden=tower_hidden)
            net = MmoeNet(config, np.random.default_rng(seed + 1 + i))
            net, _ = train_net(net, Xt, Yt[:, i:i + 1], train_config,
                               seed + 10 + i, Xv, Yv[:, i:i + 1])
            nets[task] = net
    model = CalibModel(kind=kind, dense_mean=mean, dense_std=std, nets=nets)
    model.version = _version_of(nets)
    return model
