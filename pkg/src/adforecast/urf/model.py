"""User response forecaster: paired click/conversion FMs over one vocabulary."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import SchemaError
from ..synthlog.io import UrfRow
from ..synthlog.logs import AuctionRecord
from ..synthlog.world import World
from .features import (ActionLog, FeatureVocab, WorldArrays, gen_action_log,
                       vocab_from_world)
from .fm import (FmParams, FmTrainConfig, fm_predict, train_fm)

SCHEMA = "adforecast.urf_model/1"


@dataclass
class UrfModel:
    vocab: FeatureVocab
    ctr: FmParams
    cvr: FmParams
    k: int
    version: str = ""

    def predict(self, idx: np.ndarray, dense: np.ndarray
                ) -> Tuple[np.ndarray, np.ndarray]:
        return (fm_predict(self.ctr, idx, dense),
                fm_predict(self.cvr, idx, dense))

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "version": self.version,
            "k": self.k,
            "vocab": self.vocab.to_dict(),
            "ctr": self.ctr.to_dict(),
            "cvr": self.cvr.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "UrfModel":
        if obj.get("schema") != SCHEMA:
            raise SchemaError(f"not a URF model file (schema {obj.get('schema')!r})")
        return cls(
            vocab=FeatureVocab.from_dict(obj["vocab"]),
            ctr=FmParams.from_dict(obj["ctr"]),
            cvr=FmParams.from_dict(obj["cvr"]),
            k=int(obj["k"]),
            version=str(obj.get("version", "")),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"), sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "UrfModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _version_of(ctr: FmParams, cvr: FmParams) -> str:
    blob = json.dumps([ctr.to_dict(), cvr.to_dict()], sort_keys=True)
    return "urf-" + hashlib.sha1(blob.encode()).hexdigest()[:10]


def train_urf(world: World, actions: ActionLog,
              config: FmTrainConfig = None, seed: int = 0,
              vocab: FeatureVocab = None) -> UrfModel:
    """Train the click head on all events and the conversion head on the
    clicked subset (conversion labels are defined post-click)."""
    config = config or FmTrainConfig()
    vocab = vocab or vocab_from_world(world)
    ctr, _ = train_fm(actions.idx, actions.dense, actions.click,
                      vocab.n_features, config, seed)
    clicked = actions.click > 0
    cvr, _ = train_fm(actions.idx[clicked], actions.dense[clicked],
                      actions.conversion[clicked],
                      vocab.n_features, config, seed + 1)
    model = UrfModel(vocab=vocab, ctr=ctr, cvr=cvr, k=config.k)
    model.version = _version_of(ctr, cvr)
    return model


def score_records(model: UrfModel, arrays: WorldArrays,
                  records: Sequence[AuctionRecord], advertiser_row: int
                  ) -> Tuple[np.ndarray, np.ndarray]:
    """Score every record for one advertiser. Returns (pctr, pcvr)."""
    users = np.asarray([arrays.user_row[r.user_id] for r in records])
    hours = np.asarray([r.hour for r in records])
    zones = np.asarray([arrays.zone_row[r.adzone_id] for r in records])
    advs = np.full(len(records), advertiser_row)
    idx = arrays.sparse_idx(users, advs, hours, zones)
    dense = arrays.dense_counts(users, advs)
    return model.predict(idx, dense)


def emit_urf_log(world: World, model: UrfModel,
                 auctions: Sequence[AuctionRecord]) -> List[UrfRow]:
    """One URF row per (sampled request, advertiser) pair.

    Scores come from the trained model, clamped into (0, 1) by prediction,
    so the replay engine sees exactly what the forecaster would emit.
    """
    arrays = WorldArrays(world, model.vocab)
    sampled = [r for r in auctions if r.sampled]
    rows: List[UrfRow] = []
    for adv_row, adv_id in enumerate(arrays.adv_ids):
        if not sampled:
            break
        pctr, pcvr = score_records(model, arrays, sampled, adv_row)
        for i, rec in enumerate(sampled):
            rows.append(UrfRow(request_id=rec.request_id,
                               advertiser_id=adv_id,
                               pctr=float(pctr[i]), pcvr=float(pcvr[i])))
    rows.sort(key=lambda r: (r.request_id, r.advertiser_id))
    return rows
