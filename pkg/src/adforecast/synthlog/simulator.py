"""Ground-truth delivery simulator.

Produces the labels the calibration model learns to predict: what a
campaign actually delivers over the full (un-sampled) day. It runs the same
rank semantics as the replay engine but with systematic deviations the
replay cannot see:

* parallel retrieval reaches extra audience beyond the two-stage
  tag-to-user retrieval, by a fraction that depends on the targeting
  option (behavioral targeting benefits most);
* the production bidder's pctr is calibrated differently from the logged
  URF snapshot, modeled as a multiplicative shift;
* market prices drift away from the logged snapshot over the day
  (per-hour random walk plus per-auction microstructure noise);
* delivered clicks follow the world's latent click model rather than the
  URF snapshot, so the click label carries the model's estimation error;
* a fraction of wins never renders on the client: the impression is not
  counted, cannot earn a click, and is not billed (the freed budget flows
  to later auctions), at an hourly render-failure rate;
* the platform's delivery controller treats campaigns by tier: where a
  campaign sits in the day's price distribution, how large its audience
  is, and how clickable its traffic is decide a systematic delivery
  multiplier (a coarse grid of tier adjustments with a price-by-audience
  interaction). Manual campaigns see it on all three indicators; for
  automatic campaigns the platform spends the budget either way, so the
  tier moves impressions and clicks but never the invoiced spend;
* campaign-level idiosyncrasies scatter each indicator independently:
  viewability standards discount counted impressions, creative quality
  moves realized click-through, and billing adjustments move invoiced
  manual spend (automatic spend is platform-billed exactly);
* crowding throttles bid-based delivery: a manual campaign loses part of
  the auctions its bid clears to competitors the log never recorded,
  on a platform-systematic hour-by-bidding-type profile. Automatic
  campaigns are exempt (the platform paces them to the budget), so a
  budget constrained campaign still spends its budget;
* per-campaign pacing jitter adds seeded hourly throttle noise on top.

Platform-level draws (pacing profile, drift path, per-record throttle
uniforms) come from the strategy's own seed and are keyed by log record,
so they are shared by every campaign and consistent across runs; the
per-campaign seed drives only campaign-local realization. With every knob
at its neutral value (boost 0, shift 1, jitter 0, and the extra channels
off, as in StrategyConfig.degenerate()) the simulator output equals the
replay engine run over the full day exactly, which pins the two code
paths together.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..errors import ConfigError, UnknownIdError
from ..replay.criteria import (BiddingType, CampaignCriteria,
                               targeting_option, validate_criteria)
from ..replay.engine import (LogIndex, MatchedAuctions, _join_and_stats,
                             _matched_rows, prorate_and_scale, rank_auto,
                             rank_manual)
from .world import PROFILE_FIELDS, World, _profile_key

BIDDING_ORDER = list(BiddingType)

# tier-grid resolution of the platform's delivery controller
N_COST_TIERS = 10
N_AUDIENCE_TIERS = 6
N_PCTR_TIERS = 8

# tier nodes: log price level vs the day's mean clearing bid, log audience
# fraction of the logged population, and log mean pctr vs the world's
# average click rate; the controller response interpolates between nodes
_COST_NODES = np.linspace(-0.9, 0.9, N_COST_TIERS)
_AUDIENCE_NODES = np.linspace(-0.9, -0.05, N_AUDIENCE_TIERS)
_PCTR_NODES = np.linspace(-1.0, 1.0, N_PCTR_TIERS)


def _default_boost() -> Dict[str, float]:
    return {"profile": 0.05, "behavior": 0.30, "mixed": 0.15}


@dataclass
class StrategyConfig:
    """Systematic deviations of true delivery from naive replay."""

    # extra audience fraction reached by parallel retrieval, per targeting option
    parallel_retrieval_boost: Dict[str, float] = field(default_factory=_default_boost)
    # multiplicative bias between the production bidder's pctr and the URF log
    pctr_calibration_shift: float = 1.15
    # scale of per-hour, per-campaign pacing throttles, 0 disables them
    pacing_jitter: float = 0.10
    # crowding depth on bid-based (manual) delivery, 0 disables; the win
    # rate on bid-clearing auctions is 1 - depth * (hourly profile)
    pacing_depth: float = 0.0
    # scale of intra-day market-price drift off the logged snapshot, 0 disables
    price_drift: float = 0.0
    # peak fraction of wins lost to render failures (uncounted, unbilled),
    # 0 disables
    render_loss: float = 0.0
    # log-scale strength of the per-tier delivery multiplier, 0 disables
    tier_throttle: float = 0.0
    # log-scale spread of per-campaign idiosyncrasies, one independent
    # multiplier per indicator (viewability, creative, billing); 0 disables
    campaign_noise: float = 0.0
    # count clicks from the world's latent pctr instead of the logged URF pctr
    world_click_model: bool = False
    # seed of the platform-level draws (pacing profile, price path)
    seed: int = 0

    def validate(self) -> None:
        for option, boost in self.parallel_retrieval_boost.items():
            if boost < 0:
                raise ConfigError(f"boost for {option!r} must be >= 0")
        if not self.pctr_calibration_shift > 0:
            raise ConfigError("pctr_calibration_shift must be positive")
        if self.pacing_jitter < 0 or self.pacing_jitter > 1:
            raise ConfigError("pacing_jitter must lie in [0, 1]")
        if self.pacing_depth < 0 or self.pacing_depth >= 1:
            raise ConfigError("pacing_depth must lie in [0, 1)")
        if self.price_drift < 0:
            raise ConfigError("price_drift must be >= 0")
        if self.render_loss < 0 or self.render_loss >= 1:
            raise ConfigError("render_loss must lie in [0, 1)")
        if self.tier_throttle < 0:
            raise ConfigError("tier_throttle must be >= 0")
        if self.campaign_noise < 0:
            raise ConfigError("campaign_noise must be >= 0")

    @staticmethod
    def degenerate() -> "StrategyConfig":
        """All deviation channels off: true delivery equals full-log replay."""
        return StrategyConfig(
            parallel_retrieval_boost={"profile": 0.0, "behavior": 0.0, "mixed": 0.0},
            pctr_calibration_shift=1.0,
            pacing_jitter=0.0,
            pacing_depth=0.0,
            price_drift=0.0,
            render_loss=0.0,
            tier_throttle=0.0,
            campaign_noise=0.0,
            world_click_model=False,
        )


@dataclass
class TruePerformance:
    impression: float
    click: float        # expected count under the delivering click model
    cost: float

    def to_dict(self) -> dict:
        return vars(self).copy()

    @classmethod
    def from_dict(cls, obj: dict) -> "TruePerformance":
        return cls(impression=float(obj["impression"]),
                   click=float(obj["click"]), cost=float(obj["cost"]))


def _boosted_audience(index: LogIndex, audience: np.ndarray, boost: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Add floor(boost * |audience|) extra users outside the audience.

    Extras are taken in the order of one fixed seeded permutation, skipping
    users already targeted, so a larger audience always maps to a superset
    of reached users.
    """
    n_extra = int(boost * int(audience.sum()))
    if n_extra <= 0:
        return audience
    perm = rng.permutation(len(audience))
    outside = perm[~audience[perm]]
    boosted = audience.copy()
    boosted[outside[:n_extra]] = True
    return boosted


def _platform_draws(index: LogIndex, strategy: StrategyConfig) -> dict:
    """Platform-level randomness, shared by all campaigns on this log.

    Keyed by log record so that a campaign matching a superset of records
    sees identical draws on the shared ones (audience monotonicity), and
    cached on the index because the draws are O(record count).
    """
    key = (strategy.seed, len(index))
    cache = index.__dict__.setdefault("_platform_draws", {})
    draws = cache.get(key)
    if draws is None:
        prng = np.random.default_rng(np.random.SeedSequence([strategy.seed, 17]))
        draws = {
            # hour x bidding-type crowding profile in [0.6, 1.0); scaled by
            # pacing_depth it gives the fraction of clearing auctions lost
            "pacing_w": 0.6 + 0.4 * prng.random((len(BIDDING_ORDER), 24)),
            # random-walk log-price path over the day, end-of-day sd ~ 1
            "hour_path": np.cumsum(prng.normal(0.0, 1.0 / np.sqrt(24.0), 24)),
            # per-record microstructure noise and throttle/render uniforms
            "z_record": prng.standard_normal(len(index)),
            "u_record": prng.random(len(index)),
            "u_render": prng.random(len(index)),
            # hourly render-failure profile in [0, 1)
            "render_w": prng.random(24),
            # log-scale delivery-controller adjustments per campaign tier:
            # marginal tables plus a price-by-audience interaction
            "tier_cost": prng.standard_normal(N_COST_TIERS),
            "tier_aud": prng.standard_normal(N_AUDIENCE_TIERS),
            "tier_pctr": prng.standard_normal(N_PCTR_TIERS),
            "tier_cross": prng.standard_normal((N_COST_TIERS,
                                                N_AUDIENCE_TIERS)),
            # price reference the tier grid is anchored to (not a draw)
            "price_ref": float(np.mean(index.b1)) if len(index) else 1.0,
        }
        cache[key] = draws
    return draws


def _node_pos(x: float, nodes: np.ndarray) -> tuple:
    """Clamped position of x on a node grid: (left index, weight of right)."""
    x = float(np.clip(x, nodes[0], nodes[-1]))
    i = int(np.clip(np.searchsorted(nodes, x) - 1, 0, len(nodes) - 2))
    w = (x - nodes[i]) / (nodes[i + 1] - nodes[i])
    return i, w


def _tier_multiplier(draws: dict, strength: float, matched: MatchedAuctions,
                     audience_frac: float, pctr_scale: float,
                     target_ctr: float) -> float:
    """Delivery-controller multiplier for one campaign.

    The controller rates the campaign by its price level relative to the
    day's mean clearing bid, the fraction of the logged population it
    targets, and its mean predicted click rate, then applies a log-scale
    adjustment interpolated between tier nodes (three marginal tables plus
    a price-by-audience interaction). pctr_scale removes the bidder's
    calibration shift so the rating matches the statistics the logs show.
    """
    log_price = np.log(max(float(np.mean(matched.c)), 1e-12)
                       / draws["price_ref"])
    log_aud = np.log10(max(audience_frac, 1e-12))
    log_pctr = np.log(max(float(np.mean(matched.pctr)) / pctr_scale, 1e-12)
                      / target_ctr)
    level = (np.interp(log_price, _COST_NODES, draws["tier_cost"])
             + np.interp(log_aud, _AUDIENCE_NODES, draws["tier_aud"])
             + np.interp(log_pctr, _PCTR_NODES, draws["tier_pctr"]))
    i, wi = _node_pos(log_price, _COST_NODES)
    j, wj = _node_pos(log_aud, _AUDIENCE_NODES)
    cross = draws["tier_cross"]
    level += ((1 - wi) * (1 - wj) * cross[i, j]
              + wi * (1 - wj) * cross[i + 1, j]
              + (1 - wi) * wj * cross[i, j + 1]
              + wi * wj * cross[i + 1, j + 1])
    return float(np.exp(strength * level))


def _world_pctr_rows(world: World, index: LogIndex, rows: np.ndarray,
                     advertiser_id: str) -> np.ndarray:
    """True click probability for the advertiser on the given log records.

    Vectorized over records; agrees with world.true_pctr to float precision
    (same operation sequence, modulo the dot-product kernel).
    """
    cache = index.__dict__.get("_world_head_cache")
    if cache is None or cache["world"] is not world:
        head = world.ctr
        u_mat = np.zeros((len(index.users), world.config.latent_dim))
        for user_id, pos in index.users.items():
            profile = world.user_by_id(user_id)
            vec = np.zeros(world.config.latent_dim)
            for f in PROFILE_FIELDS:
                vec += head.profile_vectors[_profile_key(f, getattr(profile, f))]
            u_mat[pos] = vec
        zone_bias = np.zeros(len(index.adzones))
        for zone_id, pos in index.adzones.items():
            zone_bias[pos] = head.adzone_bias.get(zone_id, 0.0)
        cache = {"world": world, "u_mat": u_mat, "zone_bias": zone_bias}
        index.__dict__["_world_head_cache"] = cache
    head = world.ctr
    a_vec = head.advertiser_vectors.get(advertiser_id)
    if a_vec is None:
        raise UnknownIdError(f"unknown advertiser id {advertiser_id!r}")
    logit = head.bias + head.hour_bias[index.hour[rows]]
    logit = logit + cache["zone_bias"][index.adzone_idx[rows]]
    logit = logit + head.advertiser_bias[advertiser_id]
    logit = logit + cache["u_mat"][index.user_idx[rows]] @ a_vec
    return 1.0 / (1.0 + np.exp(-logit))


def simulate_true_delivery(criteria: CampaignCriteria, world: World,
                           full_index: LogIndex, strategy: StrategyConfig,
                           seed: int) -> TruePerformance:
    """True delivered performance of a campaign over the full day.

    `full_index` must carry URF scores for every record the campaign can
    match (the pipeline extends coverage beyond the sampled bucket before
    calling this). Deterministic for fixed seeds (the campaign seed here
    plus the platform seed carried by the strategy).
    """
    validate_criteria(criteria)
    strategy.validate()
    rng = np.random.default_rng(seed)

    audience = full_index.audience_mask(criteria.targeting_tags)
    audience_frac = float(audience.sum()) / max(len(audience), 1)
    option = targeting_option(criteria.targeting_tags)
    boost = strategy.parallel_retrieval_boost.get(option, 0.0)
    audience = _boosted_audience(full_index, audience, boost, rng)

    rows = _matched_rows(criteria, full_index, audience, include_unsampled=True)
    shift = strategy.pctr_calibration_shift
    if shift != 1.0:
        shifted = full_index.with_pctr_scale(shift)
    else:
        shifted = full_index
    matched = _join_and_stats(criteria, shifted, rows)

    draws = None
    tier_m = 1.0
    if strategy.tier_throttle > 0 and rows.size > 0:
        draws = _platform_draws(full_index, strategy)
        tier_m = _tier_multiplier(draws, strategy.tier_throttle, matched,
                                  audience_frac, shift,
                                  world.config.target_ctr)

    if strategy.price_drift > 0:
        draws = draws or _platform_draws(full_index, strategy)
        log_move = draws["hour_path"][matched.hour] + 0.5 * draws["z_record"][rows]
        matched.c = matched.c * np.exp(strategy.price_drift * log_move)

    keep = None
    if strategy.pacing_depth > 0 and criteria.is_manual():
        draws = draws or _platform_draws(full_index, strategy)
        bt_pos = BIDDING_ORDER.index(criteria.bidding_type)
        depth = strategy.pacing_depth * draws["pacing_w"][bt_pos]
        keep_p = 1.0 - depth[matched.hour]
        keep = draws["u_record"][rows] < keep_p
    if strategy.render_loss > 0:
        draws = draws or _platform_draws(full_index, strategy)
        hour_rate = draws["render_w"][matched.hour]
        rendered = draws["u_render"][rows] >= strategy.render_loss * hour_rate
        keep = rendered if keep is None else keep & rendered
    if strategy.pacing_jitter > 0:
        hour_keep_p = 1.0 - strategy.pacing_jitter * rng.random(24)
        jitter_keep = rng.random(len(matched)) < hour_keep_p[matched.hour]
        keep = jitter_keep if keep is None else keep & jitter_keep

    click_basis = None
    if strategy.world_click_model and rows.size > 0:
        click_basis = _world_pctr_rows(world, full_index, rows,
                                       criteria.advertiser_id)

    if criteria.is_manual():
        totals = rank_manual(matched, criteria, keep=keep,
                             click_basis=click_basis)
    else:
        totals = rank_auto(matched, criteria, keep=keep,
                           click_basis=click_basis)
    totals = prorate_and_scale(totals, criteria.budget, scale_factor=1.0)

    impression, click, cost = totals.impression, totals.click, totals.cost
    if tier_m != 1.0:
        impression *= tier_m
        click *= tier_m
        if criteria.is_manual():
            cost *= tier_m
    if strategy.campaign_noise > 0:
        viz, creative, billing = np.exp(strategy.campaign_noise
                                        * rng.standard_normal(3))
        impression *= viz
        click *= creative
        if criteria.is_manual():
            cost *= billing
    return TruePerformance(impression=impression, click=click, cost=cost)
