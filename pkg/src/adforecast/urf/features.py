"""Feature encoding for the user response forecaster.

Sparse one-hot groups: the four user profile fields, advertiser id, hour,
and adzone. Each group owns one out-of-vocabulary slot so values unseen at
training time encode without crashing. Dense features are the
interactive-behavior counts (browse, buy) between the user and advertiser.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import EncodingError, UnknownIdError
from ..synthlog.world import PROFILE_FIELDS, PROFILE_VALUES, World

DENSE_NAMES = ("browse_count", "buy_count")


@dataclass
class FeatureVocab:
    groups: List[Tuple[str, List[str]]]

    def __post_init__(self):
        self.offsets = {}
        self.positions: Dict[str, Dict[str, int]] = {}
        total = 0
        for name, values in self.groups:
            self.offsets[name] = total
            self.positions[name] = {v: i for i, v in enumerate(values)}
            total += len(values) + 1  # trailing OOV slot
        self.n_features = total

    def encode(self, group: str, value: str) -> int:
        if group not in self.offsets:
            raise EncodingError(f"unknown feature group {group!r}")
        offset = self.offsets[group]
        pos = self.positions[group].get(str(value))
        if pos is None:
            pos = len(self.positions[group])  # OOV
        return offset + pos

    def to_dict(self) -> dict:
        return {"groups": [[name, list(values)] for name, values in self.groups]}

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureVocab":
        return cls(groups=[(name, list(values)) for name, values in obj["groups"]])


def vocab_from_world(world: World) -> FeatureVocab:
    groups: List[Tuple[str, List[str]]] = []
    for f in PROFILE_FIELDS:
        groups.append((f, list(PROFILE_VALUES[f])))
    groups.append(("advertiser_id", world.advertiser_ids()))
    groups.append(("hour", [str(h) for h in range(24)]))
    groups.append(("adzone_id", list(world.adzones)))
    return FeatureVocab(groups=groups)


N_SPARSE_GROUPS = len(PROFILE_FIELDS) + 3


def featurize(vocab: FeatureVocab, world: World, user_id: str,
              advertiser_id: str, hour: int, adzone_id: str
              ) -> Tuple[np.ndarray, np.ndarray]:
    """Encode one (user, advertiser, context) into sparse indices and dense
    counts. Unknown users raise UnknownIdError; unknown categorical values
    fall back to the group's OOV slot."""
    user = world.user_by_id(user_id)
    idx = np.empty(N_SPARSE_GROUPS, dtype=np.int64)
    for i, f in enumerate(PROFILE_FIELDS):
        idx[i] = vocab.encode(f, getattr(user, f))
    idx[4] = vocab.encode("advertiser_id", advertiser_id)
    idx[5] = vocab.encode("hour", str(int(hour)))
    idx[6] = vocab.encode("adzone_id", adzone_id)
    browse, buy = world.interactions.get((user_id, advertiser_id), (0, 0))
    dense = np.array([float(browse), float(buy)])
    return idx, dense


@dataclass
class ActionLog:
    """Batch of action samples for response-model training.

    true_pctr / true_pcvr are generator-side auxiliaries (the latent
    probabilities each label was drawn from); they never feed the model and
    exist so sanity checks can score against the Bayes predictor.
    """

    idx: np.ndarray          # (n, N_SPARSE_GROUPS) sparse feature indices
    dense: np.ndarray        # (n, 2) browse/buy counts
    click: np.ndarray        # (n,) binary click labels
    conversion: np.ndarray   # (n,) binary conversion labels (post-click)
    true_pctr: np.ndarray
    true_pcvr: np.ndarray


class WorldArrays:
    """Vectorized views of a world for bulk featurization and scoring."""

    def __init__(self, world: World, vocab: FeatureVocab = None):
        from ..synthlog.world import PROFILE_FIELDS, _profile_key

        self.world = world
        self.vocab = vocab or vocab_from_world(world)
        n_users = len(world.users)
        self.user_row = {u.user_id: i for i, u in enumerate(world.users)}
        self.adv_ids = world.advertiser_ids()
        self.adv_row = {a: i for i, a in enumerate(self.adv_ids)}
        self.zone_row = {z: i for i, z in enumerate(world.adzones)}

        self.profile_idx = np.empty((n_users, len(PROFILE_FIELDS)),
                                    dtype=np.int64)
        for i, user in enumerate(world.users):
            for j, f in enumerate(PROFILE_FIELDS):
                self.profile_idx[i, j] = self.vocab.encode(f, getattr(user, f))
        self.adv_feat_idx = np.asarray(
            [self.vocab.encode("advertiser_id", a) for a in self.adv_ids])
        self.hour_feat_idx = np.asarray(
            [self.vocab.encode("hour", str(h)) for h in range(24)])
        self.zone_feat_idx = np.asarray(
            [self.vocab.encode("adzone_id", z) for z in world.adzones])

        def head_arrays(head):
            dim = world.config.latent_dim
            u_vec = np.zeros((n_users, dim))
            for i, user in enumerate(world.users):
                for f in PROFILE_FIELDS:
                    u_vec[i] += head.profile_vectors[
                        _profile_key(f, getattr(user, f))]
            a_vec = np.stack([head.advertiser_vectors[a] for a in self.adv_ids])
            a_bias = np.asarray([head.advertiser_bias[a] for a in self.adv_ids])
            z_bias = np.asarray([head.adzone_bias[z] for z in world.adzones])
            return u_vec, a_vec, a_bias, z_bias

        self.ctr_arrays = head_arrays(world.ctr)
        self.cvr_arrays = head_arrays(world.cvr)

        browse = np.zeros((n_users, len(self.adv_ids)))
        buy = np.zeros((n_users, len(self.adv_ids)))
        for (user_id, adv_id), (b, y) in world.interactions.items():
            browse[self.user_row[user_id], self.adv_row[adv_id]] = b
            buy[self.user_row[user_id], self.adv_row[adv_id]] = y
        self.browse = browse
        self.buy = buy

    def sparse_idx(self, users: np.ndarray, advs: np.ndarray,
                   hours: np.ndarray, zones: np.ndarray) -> np.ndarray:
        idx = np.empty((len(users), N_SPARSE_GROUPS), dtype=np.int64)
        idx[:, :4] = self.profile_idx[users]
        idx[:, 4] = self.adv_feat_idx[advs]
        idx[:, 5] = self.hour_feat_idx[hours]
        idx[:, 6] = self.zone_feat_idx[zones]
        return idx

    def dense_counts(self, users: np.ndarray, advs: np.ndarray) -> np.ndarray:
        return np.stack([self.browse[users, advs], self.buy[users, advs]],
                        axis=1)

    def true_probs(self, head_arrays, head, users: np.ndarray,
                   advs: np.ndarray, hours: np.ndarray,
                   zones: np.ndarray) -> np.ndarray:
        u_vec, a_vec, a_bias, z_bias = head_arrays
        logit = (head.bias + head.hour_bias[hours] + z_bias[zones]
                 + a_bias[advs] + np.einsum("ij,ij->i", u_vec[users],
                                            a_vec[advs]))
        return 1.0 / (1.0 + np.exp(-logit))


def gen_action_log(world: World, n_events: int, seed: int,
                   vocab: FeatureVocab = None,
                   arrays: WorldArrays = None) -> ActionLog:
    """Sample action-log events from the world's latent response model.

    Each event is a uniformly random (user, advertiser) pair in a random
    context; the click label is Bernoulli in the true pctr and, for clicked
    events, conversion is Bernoulli in the true pcvr.
    """
    from ..synthlog.logs import HOUR_CURVE

    if arrays is None:
        arrays = WorldArrays(world, vocab)
    rng = np.random.default_rng(seed)
    users = rng.integers(0, len(world.users), size=n_events)
    advs = rng.integers(0, len(world.advertisers), size=n_events)
    hours = rng.choice(24, size=n_events, p=HOUR_CURVE / HOUR_CURVE.sum())
    zones = rng.integers(0, len(world.adzones), size=n_events)

    idx = arrays.sparse_idx(users, advs, hours, zones)
    dense = arrays.dense_counts(users, advs)
    p_click = arrays.true_probs(arrays.ctr_arrays, world.ctr, users, advs,
                                hours, zones)
    p_conv = arrays.true_probs(arrays.cvr_arrays, world.cvr, users, advs,
                               hours, zones)
    click = (rng.random(n_events) < p_click).astype(np.float64)
    conversion = np.zeros(n_events)
    clicked = click > 0
    conversion[clicked] = (rng.random(int(clicked.sum()))
                           < p_conv[clicked]).astype(np.float64)
    return ActionLog(idx=idx, dense=dense, click=click,
                     conversion=conversion, true_pctr=p_click,
                     true_pcvr=p_conv)
