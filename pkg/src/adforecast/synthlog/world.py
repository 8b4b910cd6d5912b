"""Synthetic advertising world.

The world holds the static entities a day of auction traffic is generated
from: users with categorical profiles, targeting tags mapping to user
subsets, advertisers, and a latent response model that yields the true
click/conversion probability for any (user, advertiser, hour, adzone)
combination.

The latent model is a logistic link over additive biases plus a dot product
between profile-value vectors and advertiser vectors. Because the logit is a
second-order function of exactly the categorical fields exposed to the
response model downstream, a factorization machine over those fields is
well-specified and the latent probabilities themselves are the Bayes
predictor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from ..errors import ConfigError, UnknownIdError

AGE_BANDS = ["18-24", "25-34", "35-44", "45-54", "55+"]
GENDERS = ["female", "male", "unknown"]
DEVICES = ["android", "ios", "pc"]
INCOME_BANDS = ["low", "mid", "high"]
CATEGORIES = ["fashion", "electronics", "grocery", "home", "beauty", "sports"]

PROFILE_FIELDS = ["age_band", "gender", "device", "income_band"]
PROFILE_VALUES = {
    "age_band": AGE_BANDS,
    "gender": GENDERS,
    "device": DEVICES,
    "income_band": INCOME_BANDS,
}

# Tag ids are prefixed with their kind. Profile tags enumerate one profile
# value each; behavior tags are arbitrary user subsets.
PROFILE_TAG_PREFIX = "pf:"
BEHAVIOR_TAG_PREFIX = "bh:"


@dataclass
class WorldConfig:
    n_users: int = 1000
    n_tags: int = 50              # includes the fixed profile tags
    n_advertisers: int = 20
    n_areas: int = 8
    n_adzones: int = 6
    latent_dim: int = 4           # dimension of the interaction vectors
    latent_scale: float = 0.9     # spread of interaction logits
    bias_scale: float = 0.35      # spread of hour/adzone/advertiser biases
    target_ctr: float = 0.04      # calibrated mean of true pctr
    target_cvr: float = 0.08      # calibrated mean of true pcvr
    ctr_band: float = 0.5         # relative band around target (sanity checks)
    behavior_tag_density: Tuple[float, float] = (0.03, 0.25)
    interactions_per_user: float = 3.0


@dataclass
class UserProfile:
    user_id: str
    age_band: str
    gender: str
    device: str
    income_band: str


@dataclass
class AdvertiserProfile:
    advertiser_id: str
    category: str
    base_quality: float  # in (0, 1); shifts the advertiser's response level


@dataclass
class LatentResponse:
    """Parameters of one logistic response head (ctr or cvr)."""

    bias: float
    hour_bias: np.ndarray                      # (24,)
    adzone_bias: Dict[str, float]
    advertiser_bias: Dict[str, float]
    profile_vectors: Dict[str, np.ndarray]     # "field=value" -> (dim,)
    advertiser_vectors: Dict[str, np.ndarray]  # advertiser_id -> (dim,)


@dataclass
class World:
    config: WorldConfig
    users: List[UserProfile]
    tags: Dict[str, List[str]]                 # tag_id -> member user ids
    advertisers: List[AdvertiserProfile]
    areas: List[str]
    adzones: List[str]
    ctr: LatentResponse
    cvr: LatentResponse
    # (user_id, advertiser_id) -> (browse_count, buy_count)
    interactions: Dict[Tuple[str, str], Tuple[int, int]] = field(default_factory=dict)

    def user_by_id(self, user_id: str) -> UserProfile:
        try:
            return self._user_index[user_id]
        except AttributeError:
            self._user_index = {u.user_id: u for u in self.users}
            return self.user_by_id(user_id)
        except KeyError:
            raise UnknownIdError(f"unknown user id {user_id!r}")

    def advertiser_ids(self) -> List[str]:
        return [a.advertiser_id for a in self.advertisers]


def _profile_key(field_name: str, value: str) -> str:
    return f"{field_name}={value}"


def true_response_logit(world: World, head: LatentResponse, user_id: str,
                        advertiser_id: str, hour: int, adzone_id: str) -> float:
    """Latent logit for one (user, advertiser, hour, adzone) combination."""
    user = world.user_by_id(user_id)
    if advertiser_id not in head.advertiser_vectors:
        raise UnknownIdError(f"unknown advertiser id {advertiser_id!r}")
    u_vec = np.zeros(world.config.latent_dim)
    for f in PROFILE_FIELDS:
        u_vec += head.profile_vectors[_profile_key(f, getattr(user, f))]
    logit = head.bias
    logit += head.hour_bias[hour]
    logit += head.adzone_bias.get(adzone_id, 0.0)
    logit += head.advertiser_bias[advertiser_id]
    logit += float(u_vec @ head.advertiser_vectors[advertiser_id])
    return float(logit)


def true_pctr(world: World, user_id: str, advertiser_id: str, hour: int,
              adzone_id: str) -> float:
    return _sigmoid(true_response_logit(world, world.ctr, user_id,
                                        advertiser_id, hour, adzone_id))


def true_pcvr(world: World, user_id: str, advertiser_id: str, hour: int,
              adzone_id: str) -> float:
    return _sigmoid(true_response_logit(world, world.cvr, user_id,
                                        advertiser_id, hour, adzone_id))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _draw_head(config: WorldConfig, advertisers: List[AdvertiserProfile],
               adzones: List[str], rng: np.random.Generator,
               target_rate: float) -> LatentResponse:
    dim = config.latent_dim
    scale = config.latent_scale / np.sqrt(dim)
    profile_vectors = {}
    for f in PROFILE_FIELDS:
        for value in PROFILE_VALUES[f]:
            profile_vectors[_profile_key(f, value)] = rng.normal(0.0, scale, dim)
    advertiser_vectors = {}
    advertiser_bias = {}
    for adv in advertisers:
        advertiser_vectors[adv.advertiser_id] = rng.normal(0.0, scale, dim)
        # base quality shifts the response level, centered at quality 0.5
        advertiser_bias[adv.advertiser_id] = float(
            config.bias_scale * rng.normal() + 1.2 * (adv.base_quality - 0.5))
    # mild diurnal curve plus noise
    hours = np.arange(24)
    hour_bias = (0.25 * np.sin((hours - 14) / 24 * 2 * np.pi)
                 + config.bias_scale * 0.3 * rng.normal(size=24))
    adzone_bias = {z: float(config.bias_scale * rng.normal()) for z in adzones}
    head = LatentResponse(
        bias=0.0,
        hour_bias=hour_bias,
        adzone_bias=adzone_bias,
        advertiser_bias=advertiser_bias,
        profile_vectors=profile_vectors,
        advertiser_vectors=advertiser_vectors,
    )
    return head


def _calibrate_bias(world: World, head: LatentResponse, target: float,
                    rng: np.random.Generator) -> None:
    """Shift the global bias so the mean response over a user x advertiser x
    context sample hits the target rate. Bisection on the logit shift."""
    sample_logits = []
    hours = rng.integers(0, 24, size=len(world.users))
    zones = rng.choice(world.adzones, size=len(world.users))
    for i, user in enumerate(world.users):
        adv = world.advertisers[i % len(world.advertisers)]
        sample_logits.append(true_response_logit(
            world, head, user.user_id, adv.advertiser_id,
            int(hours[i]), str(zones[i])))
    logits = np.asarray(sample_logits)
    lo, hi = -20.0, 20.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(np.mean(_sigmoid(logits + mid))) < target:
            lo = mid
        else:
            hi = mid
    head.bias = 0.5 * (lo + hi)


def gen_world(config: WorldConfig, seed: int) -> World:
    """Generate a world deterministically from a config and a seed.

    Raises ConfigError for degenerate configurations. The returned world's
    mean true pctr over a representative sample equals config.target_ctr up
    to bisection precision.
    """
    n_profile_tags = sum(len(v) for v in PROFILE_VALUES.values())
    if config.n_users < 1 or config.n_advertisers < 1:
        raise ConfigError("world needs at least one user and one advertiser")
    if config.n_tags <= n_profile_tags:
        raise ConfigError(
            f"n_tags must exceed the {n_profile_tags} profile tags")
    if config.n_areas < 1 or config.n_adzones < 1:
        raise ConfigError("world needs at least one area and one adzone")
    if not (0.0 < config.target_ctr < 1.0 and 0.0 < config.target_cvr < 1.0):
        raise ConfigError("target rates must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    users = [
        UserProfile(
            user_id=f"u{i:05d}",
            age_band=str(rng.choice(AGE_BANDS)),
            gender=str(rng.choice(GENDERS)),
            device=str(rng.choice(DEVICES)),
            income_band=str(rng.choice(INCOME_BANDS)),
        )
        for i in range(config.n_users)
    ]
    advertisers = [
        AdvertiserProfile(
            advertiser_id=f"a{i:03d}",
            category=str(rng.choice(CATEGORIES)),
            base_quality=float(rng.uniform(0.2, 0.95)),
        )
        for i in range(config.n_advertisers)
    ]
    areas = [f"area{i:02d}" for i in range(config.n_areas)]
    adzones = [f"az{i}" for i in range(config.n_adzones)]

    tags: Dict[str, List[str]] = {}
    for f in PROFILE_FIELDS:
        for value in PROFILE_VALUES[f]:
            tag_id = PROFILE_TAG_PREFIX + _profile_key(f, value)
            tags[tag_id] = [u.user_id for u in users if getattr(u, f) == value]
            if not tags[tag_id]:
                # force non-emptiness: reassign one random user to this value
                u = users[int(rng.integers(0, len(users)))]
                setattr(u, f, value)
                tags[tag_id] = [u.user_id]
    lo, hi = config.behavior_tag_density
    for i in range(config.n_tags - n_profile_tags):
        density = float(rng.uniform(lo, hi))
        members = [u.user_id for u in users if rng.random() < density]
        if not members:
            members = [users[int(rng.integers(0, len(users)))].user_id]
        tags[BEHAVIOR_TAG_PREFIX + f"{i:03d}"] = members

    world = World(
        config=config,
        users=users,
        tags=tags,
        advertisers=advertisers,
        areas=areas,
        adzones=adzones,
        ctr=_draw_head(config, advertisers, adzones, rng, config.target_ctr),
        cvr=_draw_head(config, advertisers, adzones, rng, config.target_cvr),
    )
    _calibrate_bias(world, world.ctr, config.target_ctr, rng)
    _calibrate_bias(world, world.cvr, config.target_cvr, rng)

    # interactive-behavior counts for a sparse set of (user, advertiser) pairs
    adv_ids = world.advertiser_ids()
    for user in users:
        n_pairs = int(rng.poisson(config.interactions_per_user))
        if n_pairs == 0:
            continue
        chosen = rng.choice(len(adv_ids), size=min(n_pairs, len(adv_ids)),
                            replace=False)
        for j in chosen:
            browse = 1 + int(rng.poisson(2.0))
            buy = int(rng.binomial(browse, 0.15))
            world.interactions[(user.user_id, adv_ids[int(j)])] = (browse, buy)
    return world


def world_to_dict(world: World) -> dict:
    def head_to_dict(h: LatentResponse) -> dict:
        return {
            "bias": h.bias,
            "hour_bias": h.hour_bias.tolist(),
            "adzone_bias": h.adzone_bias,
            "advertiser_bias": h.advertiser_bias,
            "profile_vectors": {k: v.tolist() for k, v in h.profile_vectors.items()},
            "advertiser_vectors": {k: v.tolist() for k, v in h.advertiser_vectors.items()},
        }

    c = world.config
    return {
        "config": {
            "n_users": c.n_users, "n_tags": c.n_tags,
            "n_advertisers": c.n_advertisers, "n_areas": c.n_areas,
            "n_adzones": c.n_adzones, "latent_dim": c.latent_dim,
            "latent_scale": c.latent_scale, "bias_scale": c.bias_scale,
            "target_ctr": c.target_ctr, "target_cvr": c.target_cvr,
            "ctr_band": c.ctr_band,
            "behavior_tag_density": list(c.behavior_tag_density),
            "interactions_per_user": c.interactions_per_user,
        },
        "users": [vars(u) for u in world.users],
        "tags": world.tags,
        "advertisers": [vars(a) for a in world.advertisers],
        "areas": world.areas,
        "adzones": world.adzones,
        "ctr": head_to_dict(world.ctr),
        "cvr": head_to_dict(world.cvr),
        "interactions": [
            [u, a, b, y] for (u, a), (b, y) in world.interactions.items()
        ],
    }


def world_from_dict(data: dict) -> World:
    def head_from_dict(d: dict) -> LatentResponse:
        return LatentResponse(
            bias=float(d["bias"]),
            hour_bias=np.asarray(d["hour_bias"], dtype=float),
            adzone_bias={k: float(v) for k, v in d["adzone_bias"].items()},
            advertiser_bias={k: float(v) for k, v in d["advertiser_bias"].items()},
            profile_vectors={k: np.asarray(v, dtype=float)
                             for k, v in d["profile_vectors"].items()},
            advertiser_vectors={k: np.asarray(v, dtype=float)
                                for k, v in d["advertiser_vectors"].items()},
        )

    cfg = data["config"]
    config = WorldConfig(
        n_users=cfg["n_users"], n_tags=cfg["n_tags"],
        n_advertisers=cfg["n_advertisers"], n_areas=cfg["n_areas"],
        n_adzones=cfg["n_adzones"], latent_dim=cfg["latent_dim"],
        latent_scale=cfg["latent_scale"], bias_scale=cfg["bias_scale"],
        target_ctr=cfg["target_ctr"], target_cvr=cfg["target_cvr"],
        ctr_band=cfg["ctr_band"],
        behavior_tag_density=tuple(cfg["behavior_tag_density"]),
        interactions_per_user=cfg["interactions_per_user"],
    )
    return World(
        config=config,
        users=[UserProfile(**u) for u in data["users"]],
        tags={k: list(v) for k, v in data["tags"].items()},
        advertisers=[AdvertiserProfile(**a) for a in data["advertisers"]],
        areas=list(data["areas"]),
        adzones=list(data["adzones"]),
        ctr=head_from_dict(data["ctr"]),
        cvr=head_from_dict(data["cvr"]),
        interactions={(u, a): (int(b), int(y))
                      for u, a, b, y in data["interactions"]},
    )
