"""Calibration model inputs.

A campaign's calibration input concatenates one-hot encodings of its
discrete criteria (targeting option, objective, bidding type, plus the
hours-of-day mask) with ten dense features taken from the replay:
matched-set statistics plus the replayed base performance. Dense features
are z-scored with statistics fitted on the training split; a zero-variance
feature standardizes to 0. Budget and bid price stay out of the input on
purpose: the model must learn the replay-to-truth correction, not the
spend plan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EncodingError
from ..replay.criteria import (BiddingType, CampaignCriteria, Objective,
                               TARGETING_OPTIONS, targeting_option)
from ..replay.engine import ReplayResult

OBJECTIVES = tuple(o.value for o in Objective)
BIDDING_TYPES = tuple(b.value for b in BiddingType)
DENSE_FIELDS = (
    "pctr_mean", "pctr_median", "cost_mean", "cost_median", "cost",
    "value_mean", "value_median", "audience_size", "click", "impression",
)
N_HOURS = 24
N_ONEHOT = len(TARGETING_OPTIONS) + len(OBJECTIVES) + len(BIDDING_TYPES) + N_HOURS
N_DENSE = len(DENSE_FIELDS)
N_INPUTS = N_ONEHOT + N_DENSE


@dataclass
class CalibInput:
    onehot: np.ndarray   # (N_ONEHOT,)
    dense: np.ndarray    # (N_DENSE,) raw, z-scored at encode time


def _one_hot(value: str, choices, group: str) -> np.ndarray:
    vec = np.zeros(len(choices))
    try:
        vec[choices.index(value)] = 1.0
    except ValueError:
        raise EncodingError(f"unknown {group} value {value!r}")
    return vec


def build_calib_input(criteria: CampaignCriteria,
                      replay_result: ReplayResult) -> CalibInput:
    hour_mask = np.zeros(N_HOURS)
    hour_mask[list(criteria.hours)] = 1.0
    onehot = np.concatenate([
        _one_hot(targeting_option(criteria.targeting_tags),
                 list(TARGETING_OPTIONS), "targeting option"),
        _one_hot(criteria.objective.value, list(OBJECTIVES), "objective"),
        _one_hot(criteria.bidding_type.value, list(BIDDING_TYPES),
                 "bidding type"),
        hour_mask,
    ])
    s = replay_result.match_stats
    dense = np.array([
        s.pctr_mean, s.pctr_median, s.cost_mean, s.cost_median,
        replay_result.cost, s.value_mean, s.value_median,
        float(s.audience_size), replay_result.click, replay_result.impression,
    ])
    return CalibInput(onehot=onehot, dense=dense)


def encode(inputs, dense_mean: np.ndarray, dense_std: np.ndarray) -> np.ndarray:
    """Stack CalibInputs into the network input matrix, z-scoring dense
    features with the stored statistics (zero-variance features become 0)."""
    single = isinstance(inputs, CalibInput)
    if single:
        inputs = [inputs]
    onehot = np.stack([ci.onehot for ci in inputs])
    dense = np.stack([ci.dense for ci in inputs])
    safe = np.where(dense_std > 0, dense_std, 1.0)
    z = np.where(dense_std > 0, (dense - dense_mean) / safe, 0.0)
    X = np.concatenate([onehot, z], axis=1)
    return X[0] if single else X


def dense_stats(inputs) -> tuple:
    dense = np.stack([ci.dense for ci in inputs])
    return dense.mean(axis=0), dense.std(axis=0)
