"""Shared fixtures: a hand-checked micro auction set and a small but fully
wired world/log/model stack reused across module tests."""

import numpy as np
import pytest

from adforecast.dataset import build_full_index
from adforecast.replay.criteria import (BiddingType, CampaignCriteria,
                                        Objective)
from adforecast.replay.engine import (LogIndex, MatchedAuction,
                                      MatchedAuctions)
from adforecast.synthlog.io import LogManifest, UtsRow
from adforecast.synthlog.logs import LogConfig, gen_day_logs
from adforecast.synthlog.world import WorldConfig, gen_world
from adforecast.urf.features import gen_action_log
from adforecast.urf.fm import FmTrainConfig
from adforecast.urf.model import train_urf

SMALL_WORLD_CONFIG = WorldConfig(n_users=300, n_tags=30, n_advertisers=8,
                                 n_areas=4, n_adzones=4)


def micro_matched():
    """Three auctions with easy hand arithmetic.

    The campaign's advertiser lost each logged auction, so the market price
    is b1: 5, 12, 2 eCPM. pctr 0.1, 0.2, 0.05; pcvr 0.5 flat.
    """
    records = [
        MatchedAuction(request_id="r1", hour=1, c=5.0, pctr=0.10, pcvr=0.5,
                       v=0.10),
        MatchedAuction(request_id="r2", hour=2, c=12.0, pctr=0.20, pcvr=0.5,
                       v=0.20),
        MatchedAuction(request_id="r3", hour=3, c=2.0, pctr=0.05, pcvr=0.5,
                       v=0.05),
    ]
    return MatchedAuctions.from_records(records)


def micro_criteria(bidding_type, budget, bidprice=None, constraint=None,
                   objective=Objective.CLICK):
    return CampaignCriteria(
        advertiser_id="a1", hours=tuple(range(24)), areas=("area00",),
        adzones=("az0",), targeting_tags=("bh:000",), objective=objective,
        bidding_type=bidding_type, budget=budget, bidprice=bidprice,
        constraint=constraint)


@pytest.fixture(scope="session")
def small_world():
    return gen_world(SMALL_WORLD_CONFIG, seed=7)


@pytest.fixture(scope="session")
def small_auctions(small_world):
    return gen_day_logs(small_world,
                        LogConfig(n_requests=3000, sample_rate=0.3),
                        seed=11)


@pytest.fixture(scope="session")
def small_urf(small_world):
    actions = gen_action_log(small_world, n_events=30000, seed=13)
    return train_urf(small_world, actions, FmTrainConfig(epochs=3), seed=17)


@pytest.fixture(scope="session")
def small_index(small_world, small_auctions, small_urf):
    manifest = LogManifest(log_date="2026-01-01", n_requests=3000,
                           sample_rate=0.3, seed=11)
    return build_full_index(small_world, small_auctions, small_urf,
                            manifest=manifest)


def make_tiny_index(rng, n_auctions, n_users=6, n_tags=3, n_advertisers=3,
                    n_areas=2, n_adzones=2, with_scores=True):
    """A miniature random log with URF coverage for every advertiser pair.

    Built record by record, independent of the day-log generator, for
    oracle-equivalence and property tests.
    """
    from adforecast.synthlog.io import UrfRow
    from adforecast.synthlog.logs import AuctionRecord

    users = [f"u{i}" for i in range(n_users)]
    advertisers = [f"a{i}" for i in range(n_advertisers)]
    areas = [f"ar{i}" for i in range(n_areas)]
    adzones = [f"z{i}" for i in range(n_adzones)]
    tags = [f"bh:{i}" for i in range(n_tags)]

    uts = []
    tag_users = {}
    for tag in tags:
        members = [u for u in users if rng.random() < 0.6]
        if not members:
            members = [users[int(rng.integers(0, n_users))]]
        tag_users[tag] = set(members)
        uts.extend(UtsRow(tag_id=tag, user_id=u) for u in members)

    auctions = []
    for i in range(n_auctions):
        b2 = float(np.exp(rng.normal(1.2, 0.8)))
        b1 = b2 * (1.0 + float(np.exp(rng.normal(-1.0, 0.6))))
        auctions.append(AuctionRecord(
            request_id=f"r{i:04d}",
            user_id=users[int(rng.integers(0, n_users))],
            hour=int(rng.integers(0, 24)),
            area_id=areas[int(rng.integers(0, n_areas))],
            adzone_id=adzones[int(rng.integers(0, n_adzones))],
            winner=advertisers[int(rng.integers(0, n_advertisers))],
            b1=b1, b2=b2,
            sampled=bool(rng.random() < 0.7),
        ))

    urf_rows = []
    scores = {}
    if with_scores:
        for rec in auctions:
            for adv in advertisers:
                pctr = float(rng.uniform(0.005, 0.2))
                pcvr = float(rng.uniform(0.01, 0.3))
                scores[(rec.request_id, adv)] = (pctr, pcvr)
                urf_rows.append(UrfRow(request_id=rec.request_id,
                                       advertiser_id=adv,
                                       pctr=pctr, pcvr=pcvr))
    index = LogIndex(auctions, uts, urf_rows)
    return {
        "index": index, "auctions": auctions, "uts": uts,
        "tag_users": tag_users, "scores": scores, "users": users,
        "advertisers": advertisers, "areas": areas, "adzones": adzones,
        "tags": tags,
    }


def random_tiny_criteria(rng, parts, require_manual=None):
    """Random criteria against a make_tiny_index world."""
    if require_manual is None:
        pool = ["CPM", "CPC", "CPA", "BCB", "MCB"]
    elif require_manual:
        pool = ["CPM", "CPC", "CPA"]
    else:
        pool = ["BCB", "MCB"]
    bt = BiddingType(str(rng.choice(pool)))
    objective = Objective(str(rng.choice(["impression", "click",
                                          "conversion"])))
    n_tags = int(rng.integers(1, len(parts["tags"]) + 1))
    tags = tuple(str(t) for t in rng.choice(parts["tags"], size=n_tags,
                                            replace=False))
    hours = tuple(sorted(int(h) for h in rng.choice(
        24, size=int(rng.integers(4, 25)), replace=False)))
    areas = tuple(str(a) for a in rng.choice(
        parts["areas"], size=int(rng.integers(1, len(parts["areas"]) + 1)),
        replace=False))
    adzones = tuple(str(z) for z in rng.choice(
        parts["adzones"],
        size=int(rng.integers(1, len(parts["adzones"]) + 1)), replace=False))
    budget = float(np.exp(rng.normal(-4.0, 1.5)))
    bidprice = None
    constraint = None
    if bt in (BiddingType.CPM, BiddingType.CPC, BiddingType.CPA):
        bidprice = float(np.exp(rng.normal(1.5, 1.0)))
        if bt is BiddingType.CPC:
            bidprice /= 20.0
        if bt is BiddingType.CPA:
            bidprice /= 2.0
    if bt is BiddingType.MCB:
        constraint = float(np.exp(rng.normal(4.0, 1.0)))
    adv = str(parts["advertisers"][int(rng.integers(
        0, len(parts["advertisers"])))])
    return CampaignCriteria(
        advertiser_id=adv, hours=hours, areas=areas, adzones=adzones,
        targeting_tags=tags, objective=objective, bidding_type=bt,
        budget=budget, bidprice=bidprice, constraint=constraint)
