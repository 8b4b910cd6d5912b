"""Calibration dataset assembly.

Samples random campaign criteria against a generated day of logs, replays
each campaign for its base forecast, and simulates its true delivery over
the full day. Campaign knobs (bid price, budget, MCB constraint) are drawn
relative to a cheap probe of the campaign's matched auctions so the mix of
win rates and budget pressure looks like a live ad platform: mostly CPC,
a large BCB minority, small CPM/CPA/MCB slices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .evaluation.benchmark import DatasetRow
from .replay.criteria import (BiddingType, CampaignCriteria, Objective)
from .replay.engine import LogIndex, ReplayResult, manual_bid, match_phase, replay
from .synthlog.io import uts_rows_from_world
from .synthlog.logs import AuctionRecord
from .synthlog.simulator import StrategyConfig, TruePerformance, simulate_true_delivery
from .synthlog.world import (BEHAVIOR_TAG_PREFIX, PROFILE_TAG_PREFIX, World)
from .urf.features import WorldArrays
from .urf.model import UrfModel, score_records


@dataclass
class SamplerConfig:
    bidding_weights: Dict[BiddingType, float] = field(default_factory=lambda: {
        BiddingType.CPM: 0.08,
        BiddingType.CPC: 0.57,
        BiddingType.CPA: 0.05,
        BiddingType.BCB: 0.22,
        BiddingType.MCB: 0.08,
    })
    objective_weights: Tuple[float, float, float] = (0.25, 0.55, 0.20)
    # probability of targeting profile-only / behavior-only tag sets
    p_profile_only: float = 0.40
    p_behavior_only: float = 0.35
    p_all_hours: float = 0.40
    p_all_areas: float = 0.60
    p_all_adzones: float = 0.45


def _weighted_choice(rng: np.random.Generator, items, weights) -> object:
    w = np.asarray(weights, dtype=float)
    return items[int(rng.choice(len(items), p=w / w.sum()))]


def sample_criteria(world: World, index: LogIndex, rng: np.random.Generator,
                    config: SamplerConfig = SamplerConfig()) -> CampaignCriteria:
    """Draw one random campaign against the given log index."""
    profile_tags = sorted(t for t in world.tags if t.startswith(PROFILE_TAG_PREFIX))
    behavior_tags = sorted(t for t in world.tags if t.startswith(BEHAVIOR_TAG_PREFIX))

    def pick(pool: List[str], k: int) -> List[str]:
        k = min(k, len(pool))
        return [str(t) for t in rng.choice(pool, size=k, replace=False)]

    u = rng.random()
    if u < config.p_profile_only:
        tags = pick(profile_tags, int(rng.integers(1, 4)))
    elif u < config.p_profile_only + config.p_behavior_only:
        tags = pick(behavior_tags, int(rng.integers(1, 4)))
    else:
        tags = (pick(profile_tags, int(rng.integers(1, 3)))
                + pick(behavior_tags, int(rng.integers(1, 3))))

    if rng.random() < config.p_all_hours:
        hours = tuple(range(24))
    elif rng.random() < 0.6:
        start = int(rng.integers(0, 18))
        hours = tuple(range(start, min(24, start + int(rng.integers(6, 17)))))
    else:
        size = int(rng.integers(4, 21))
        hours = tuple(sorted(int(h) for h in
                             rng.choice(24, size=size, replace=False)))

    def subset(values, p_all):
        if rng.random() < p_all:
            return tuple(values)
        size = int(rng.integers(1, len(values) + 1))
        return tuple(sorted(str(v) for v in
                            rng.choice(values, size=size, replace=False)))

    areas = subset(world.areas, config.p_all_areas)
    adzones = subset(world.adzones, config.p_all_adzones)
    objective = _weighted_choice(rng, list(Objective), config.objective_weights)
    bidding = _weighted_choice(rng, list(config.bidding_weights.keys()),
                               list(config.bidding_weights.values()))
    advertiser = world.advertisers[int(rng.integers(0, len(world.advertisers)))]

    probe = CampaignCriteria(
        advertiser_id=advertiser.advertiser_id, hours=hours, areas=areas,
        adzones=adzones, targeting_tags=tuple(tags), objective=objective,
        bidding_type=BiddingType.CPM, budget=1.0, bidprice=1.0)
    matched = match_phase(probe, index)

    bidprice = None
    constraint = None
    scale = 1.0 / max(index.manifest.sample_rate, 1e-9) if index.manifest else 1.0
    if len(matched) == 0:
        day_spend = float(np.median(index.b1)) * 20 / 1000.0
        if bidding in (BiddingType.CPM, BiddingType.CPC, BiddingType.CPA):
            bidprice = float(np.median(index.b1))
            if bidding is BiddingType.CPC:
                bidprice /= 1000.0 * 0.04
            elif bidding is BiddingType.CPA:
                bidprice /= 1000.0 * 0.04 * 0.08
        if bidding is BiddingType.MCB:
            constraint = 150.0
        budget = max(day_spend, 0.01)
    else:
        c = matched.c
        if bidding in (BiddingType.CPM, BiddingType.CPC, BiddingType.CPA):
            q = float(rng.uniform(0.25, 0.97))
            target = float(np.quantile(c, q))
            if bidding is BiddingType.CPM:
                bidprice = target
            elif bidding is BiddingType.CPC:
                bidprice = target / (1000.0 * float(np.mean(matched.pctr)))
            else:
                bidprice = target / (1000.0 * float(np.mean(matched.pctr))
                                     * float(np.mean(matched.pcvr)))
            bids = manual_bid(bidding, bidprice, matched.pctr, matched.pcvr)
            slice_spend = float(np.sum(c[bids > c]) / 1000.0)
            day_spend = max(slice_spend * scale, 1e-4)
            f = float(np.exp(rng.uniform(np.log(0.7), np.log(5.0))))
        else:
            day_spend = max(float(np.sum(c) / 1000.0) * scale, 1e-4)
            f = float(rng.uniform(0.10, 0.70))
            if bidding is BiddingType.MCB:
                overall = float(np.sum(c) / max(np.sum(matched.v), 1e-12))
                constraint = overall * float(
                    np.exp(rng.uniform(np.log(0.5), np.log(1.6))))
        budget = day_spend * f
    return CampaignCriteria(
        advertiser_id=advertiser.advertiser_id, hours=hours, areas=areas,
        adzones=adzones, targeting_tags=tuple(tags), objective=objective,
        bidding_type=bidding, budget=budget, bidprice=bidprice,
        constraint=constraint)


def build_full_index(world: World, auctions: Sequence[AuctionRecord],
                     urf_model: UrfModel,
                     manifest=None) -> LogIndex:
    """Index the full day with URF scores for every (record, advertiser)
    pair, so replay (sampled bucket) and true delivery (all records) read
    identical scores."""
    index = LogIndex(auctions, uts_rows_from_world(world), [],
                     manifest=manifest)
    arrays = WorldArrays(world, urf_model.vocab)
    rows = np.arange(len(auctions))
    for adv_row, adv_id in enumerate(arrays.adv_ids):
        pctr, pcvr = score_records(urf_model, arrays, auctions, adv_row)
        index.set_scores(adv_id, rows, pctr, pcvr)
    return index


def build_rows(world: World, index: LogIndex, strategy: StrategyConfig,
               n_campaigns: int, seed: int, scale_factor: float,
               id_prefix: str = "c",
               sampler: SamplerConfig = SamplerConfig()) -> List[DatasetRow]:
    """Sample campaigns and pair replayed base performance with simulated
    true delivery. Deterministic in (world, index, strategy, seed)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    rows: List[DatasetRow] = []
    for i in range(n_campaigns):
        criteria = sample_criteria(world, index, rng, sampler)
        base = replay(criteria, index, scale_factor)
        sim_seed = int(np.random.SeedSequence([seed, 13, i]).generate_state(1)[0])
        truth = simulate_true_delivery(criteria, world, index, strategy,
                                       sim_seed)
        rows.append(DatasetRow(campaign_id=f"{id_prefix}{i:06d}",
                               criteria=criteria, replay=base, truth=truth))
    return rows
