"""Auction-log replay engine.

Forecasting a campaign is a two-phase replay of the previous day's logs:

* match phase: two-stage retrieval (targeting tags -> users -> that user's
  auctions) filtered by the campaign's hour/area/adzone criteria, joined
  with the advertiser's logged response scores (pctr, pcvr).
* rank phase: re-run the auction outcome under the campaign's bidding
  settings. Manual bidding walks the day in hour order and wins whenever
  its bid beats the logged market price while budget remains. Automatic
  bidding greedily takes auctions in ascending cost-per-value order while
  the budget (and, for MCB, the cost-per-value constraint) allows.

Costs follow second-price semantics: if the campaign's advertiser won the
logged auction the market price is the runner-up bid b2, otherwise the
winning bid b1. Prices are eCPM, so each won impression adds price/1000 to
spend. Won clicks are counted in expectation as the sum of pctr.

The engine is column-oriented: a LogIndex holds the day as numpy arrays and
the rank phase reduces to exclusive prefix sums, which keeps a forecast over
a 100k-record day in the low milliseconds while staying numerically
identical to a record-by-record walk (cumulative sums are sequential).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..errors import DataIntegrityError
from ..synthlog.io import (AUCTION_FILE, URF_FILE, UTS_FILE, LogManifest,
                           UrfRow, UtsRow, logs_dir_paths, read_auction_log,
                           read_manifest, read_urf_log, read_uts_log)
from ..synthlog.logs import AuctionRecord
from .criteria import BiddingType, CampaignCriteria, Objective, validate_criteria

import os


@dataclass
class MatchStats:
    """Aggregates over the matched auction set, used as calibration inputs."""

    audience_size: int = 0      # distinct matched users
    pctr_mean: float = 0.0
    pctr_median: float = 0.0
    cost_mean: float = 0.0      # eCPM basis
    cost_median: float = 0.0
    value_mean: float = 0.0
    value_median: float = 0.0


@dataclass
class MatchedAuction:
    request_id: str
    hour: int
    c: float      # market price, eCPM
    pctr: float
    pcvr: float
    v: float      # impression value under the campaign objective


class MatchedAuctions:
    """Column view of the matched set; iterable as MatchedAuction records."""

    def __init__(self, request_id: np.ndarray, hour: np.ndarray,
                 c: np.ndarray, pctr: np.ndarray, pcvr: np.ndarray,
                 v: np.ndarray, stats: MatchStats):
        self.request_id = request_id
        self.hour = hour
        self.c = c
        self.pctr = pctr
        self.pcvr = pcvr
        self.v = v
        self.stats = stats

    def __len__(self) -> int:
        return int(self.request_id.shape[0])

    def __iter__(self):
        for i in range(len(self)):
            yield MatchedAuction(
                request_id=str(self.request_id[i]), hour=int(self.hour[i]),
                c=float(self.c[i]), pctr=float(self.pctr[i]),
                pcvr=float(self.pcvr[i]), v=float(self.v[i]))

    @classmethod
    def from_records(cls, records: Sequence[MatchedAuction],
                     stats: Optional[MatchStats] = None) -> "MatchedAuctions":
        rid = np.asarray([r.request_id for r in records], dtype=object)
        hour = np.asarray([r.hour for r in records], dtype=np.int64)
        c = np.asarray([r.c for r in records], dtype=np.float64)
        pctr = np.asarray([r.pctr for r in records], dtype=np.float64)
        pcvr = np.asarray([r.pcvr for r in records], dtype=np.float64)
        v = np.asarray([r.v for r in records], dtype=np.float64)
        return cls(rid, hour, c, pctr, pcvr, v, stats or MatchStats())


@dataclass
class RankTotals:
    """Raw rank-phase accumulators before proration and scale-up."""

    impression: float = 0.0
    click: float = 0.0
    cost: float = 0.0       # currency (eCPM / 1000 per impression)
    value: float = 0.0


@dataclass
class ReplayResult:
    impression: float
    click: float
    cost: float
    value: float
    match_stats: MatchStats
    scale_factor: float

    def to_dict(self) -> dict:
        return {
            "impression": self.impression,
            "click": self.click,
            "cost": self.cost,
            "value": self.value,
            "scale_factor": self.scale_factor,
            "match_stats": vars(self.match_stats).copy(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ReplayResult":
        return cls(
            impression=float(obj["impression"]), click=float(obj["click"]),
            cost=float(obj["cost"]), value=float(obj["value"]),
            match_stats=MatchStats(**obj["match_stats"]),
            scale_factor=float(obj["scale_factor"]))


class LogIndex:
    """One day of logs in columnar form, ready for repeated replays."""

    def __init__(self, auctions: Sequence[AuctionRecord],
                 uts_rows: Iterable[UtsRow],
                 urf_rows: Iterable[UrfRow],
                 manifest: Optional[LogManifest] = None):
        self.manifest = manifest
        n = len(auctions)
        users: Dict[str, int] = {}
        advertisers: Dict[str, int] = {}
        areas: Dict[str, int] = {}
        adzones: Dict[str, int] = {}

        def intern(table: Dict[str, int], key: str) -> int:
            pos = table.get(key)
            if pos is None:
                pos = len(table)
                table[key] = pos
            return pos

        uts_rows = list(uts_rows)
        urf_rows = list(urf_rows)
        for row in uts_rows:
            intern(users, row.user_id)
        for row in urf_rows:
            intern(advertisers, row.advertiser_id)

        self.request_id = np.empty(n, dtype=object)
        self.user_idx = np.empty(n, dtype=np.int64)
        self.hour = np.empty(n, dtype=np.int64)
        self.area_idx = np.empty(n, dtype=np.int64)
        self.adzone_idx = np.empty(n, dtype=np.int64)
        self.winner_idx = np.empty(n, dtype=np.int64)
        self.b1 = np.empty(n, dtype=np.float64)
        self.b2 = np.empty(n, dtype=np.float64)
        self.sampled = np.empty(n, dtype=bool)
        row_of_request: Dict[str, int] = {}
        for i, rec in enumerate(auctions):
            self.request_id[i] = rec.request_id
            row_of_request[rec.request_id] = i
            self.user_idx[i] = intern(users, rec.user_id)
            self.hour[i] = rec.hour
            self.area_idx[i] = intern(areas, rec.area_id)
            self.adzone_idx[i] = intern(adzones, rec.adzone_id)
            self.winner_idx[i] = intern(advertisers, rec.winner)
            self.b1[i] = rec.b1
            self.b2[i] = rec.b2
            self.sampled[i] = rec.sampled

        self.users = users
        self.advertisers = advertisers
        self.areas = areas
        self.adzones = adzones
        self.row_of_request = row_of_request

        self.tag_members: Dict[str, np.ndarray] = {}
        per_tag: Dict[str, List[int]] = {}
        for row in uts_rows:
            per_tag.setdefault(row.tag_id, []).append(users[row.user_id])
        for tag_id, members in per_tag.items():
            mask = np.zeros(len(users), dtype=bool)
            mask[np.asarray(members, dtype=np.int64)] = True
            self.tag_members[tag_id] = mask

        n_adv = len(advertisers)
        self.pctr = np.full((n, n_adv), np.nan)
        self.pcvr = np.full((n, n_adv), np.nan)
        for row in urf_rows:
            i = row_of_request.get(row.request_id)
            if i is None:
                raise DataIntegrityError(
                    f"URF record references unknown request {row.request_id!r}")
            j = advertisers[row.advertiser_id]
            self.pctr[i, j] = row.pctr
            self.pcvr[i, j] = row.pcvr

    @classmethod
    def from_dir(cls, logs_dir: str) -> "LogIndex":
        paths = logs_dir_paths(logs_dir)
        manifest = None
        if os.path.exists(paths["manifest"]):
            manifest = read_manifest(paths["manifest"])
        return cls(
            auctions=read_auction_log(paths["auction"]),
            uts_rows=read_uts_log(paths["uts"]),
            urf_rows=read_urf_log(paths["urf"]),
            manifest=manifest,
        )

    def __len__(self) -> int:
        return int(self.request_id.shape[0])

    @property
    def record_count(self) -> int:
        return len(self)

    def advertiser_pos(self, advertiser_id: str) -> Optional[int]:
        return self.advertisers.get(advertiser_id)

    def audience_mask(self, tags: Iterable[str]) -> np.ndarray:
        """Union of user sets over targeting tags. Unknown tags contribute
        nothing; a tag covering no logged user yields an empty audience."""
        mask = np.zeros(len(self.users), dtype=bool)
        for tag in tags:
            members = self.tag_members.get(tag)
            if members is not None:
                mask |= members
        return mask

    def with_pctr_scale(self, factor: float) -> "LogIndex":
        """Shallow copy with every pctr multiplied by factor (disturbance)."""
        clone = object.__new__(LogIndex)
        clone.__dict__.update(self.__dict__)
        clone.pctr = self.pctr * factor
        return clone

    def set_scores(self, advertiser_id: str, rows: np.ndarray,
                   pctr: np.ndarray, pcvr: np.ndarray) -> None:
        """Fill URF scores for one advertiser on the given record rows.

        Used by the pipeline to extend score coverage beyond the sampled
        bucket (the true-delivery simulator replays the full day)."""
        j = self.advertisers.get(advertiser_id)
        if j is None:
            j = len(self.advertisers)
            self.advertisers[advertiser_id] = j
            self.pctr = np.concatenate(
                [self.pctr, np.full((len(self), 1), np.nan)], axis=1)
            self.pcvr = np.concatenate(
                [self.pcvr, np.full((len(self), 1), np.nan)], axis=1)
        self.pctr[rows, j] = pctr
        self.pcvr[rows, j] = pcvr


def cost_basis(record_winner: str, advertiser_id: str, b1: float, b2: float) -> float:
    """Market price for the advertiser: runner-up bid if it won the logged
    auction, else the winning bid. eCPM."""
    return b2 if record_winner == advertiser_id else b1


def impression_value(objective: Objective, pctr, pcvr):
    """Value of one impression under the campaign objective."""
    if objective is Objective.IMPRESSION:
        return np.ones_like(np.asarray(pctr, dtype=np.float64))
    if objective is Objective.CLICK:
        return np.asarray(pctr, dtype=np.float64)
    return np.asarray(pctr, dtype=np.float64) * np.asarray(pcvr, dtype=np.float64)


def manual_bid(bidding_type: BiddingType, bidprice: float, pctr, pcvr):
    """Equivalent eCPM bid for a manual campaign.

    CPM pays per mille impressions so the bid is the bidprice itself; CPC
    and CPA discount by the relevant action probabilities, scaled to the
    per-mille price basis.
    """
    if bidding_type is BiddingType.CPM:
        return np.full_like(np.asarray(pctr, dtype=np.float64), bidprice)
    if bidding_type is BiddingType.CPC:
        return bidprice * np.asarray(pctr, dtype=np.float64) * 1000.0
    if bidding_type is BiddingType.CPA:
        return (bidprice * np.asarray(pctr, dtype=np.float64)
                * np.asarray(pcvr, dtype=np.float64) * 1000.0)
    raise ValueError(f"manual_bid called with {bidding_type}")


def match_phase(criteria: CampaignCriteria, index: LogIndex,
                include_unsampled: bool = False) -> MatchedAuctions:
    """Retrieve the campaign's auctions from the log.

    Two-stage retrieval (tags -> audience -> the audience's auctions)
    followed by hour/area/adzone filtering and the URF score join for the
    campaign's advertiser. Only records in the sampled bucket participate
    unless include_unsampled is set (the true-delivery path).

    Raises DataIntegrityError when a matched auction has no URF score for
    the advertiser.
    """
    audience = index.audience_mask(criteria.targeting_tags)
    rows = _matched_rows(criteria, index, audience, include_unsampled)
    return _join_and_stats(criteria, index, rows)


def _matched_rows(criteria: CampaignCriteria, index: LogIndex,
                  audience: np.ndarray, include_unsampled: bool) -> np.ndarray:
    hour_ok = np.zeros(24, dtype=bool)
    hour_ok[list(set(criteria.hours))] = True
    area_ok = np.zeros(max(len(index.areas), 1), dtype=bool)
    for a in criteria.areas:
        pos = index.areas.get(a)
        if pos is not None:
            area_ok[pos] = True
    zone_ok = np.zeros(max(len(index.adzones), 1), dtype=bool)
    for z in criteria.adzones:
        pos = index.adzones.get(z)
        if pos is not None:
            zone_ok[pos] = True

    mask = audience[index.user_idx]
    mask &= hour_ok[index.hour]
    mask &= area_ok[index.area_idx]
    mask &= zone_ok[index.adzone_idx]
    if not include_unsampled:
        mask &= index.sampled
    return np.flatnonzero(mask)


def _join_and_stats(criteria: CampaignCriteria, index: LogIndex,
                    rows: np.ndarray) -> MatchedAuctions:
    if rows.size == 0:
        empty = np.empty(0)
        return MatchedAuctions(np.empty(0, dtype=object),
                               np.empty(0, dtype=np.int64),
                               empty, empty.copy(), empty.copy(),
                               empty.copy(), MatchStats())
    adv = index.advertiser_pos(criteria.advertiser_id)
    if adv is None:
        first = str(index.request_id[rows[0]])
        raise DataIntegrityError(
            f"no URF scores for advertiser {criteria.advertiser_id!r} "
            f"(first matched request {first!r})")
    pctr = index.pctr[rows, adv]
    pcvr = index.pcvr[rows, adv]
    bad = np.isnan(pctr) | np.isnan(pcvr)
    if bad.any():
        first = str(index.request_id[rows[int(np.argmax(bad))]])
        raise DataIntegrityError(
            f"missing URF record for request {first!r}, "
            f"advertiser {criteria.advertiser_id!r}")
    c = np.where(index.winner_idx[rows] == adv, index.b2[rows], index.b1[rows])
    v = impression_value(criteria.objective, pctr, pcvr)
    stats = MatchStats(
        audience_size=int(np.unique(index.user_idx[rows]).size),
        pctr_mean=float(np.mean(pctr)),
        pctr_median=float(np.median(pctr)),
        cost_mean=float(np.mean(c)),
        cost_median=float(np.median(c)),
        value_mean=float(np.mean(v)),
        value_median=float(np.median(v)),
    )
    return MatchedAuctions(index.request_id[rows], index.hour[rows],
                           c, pctr, pcvr, v, stats)


def _accepted_prefix_totals(c_ord: np.ndarray, click_ord: np.ndarray,
                            v_ord: np.ndarray, budget: float,
                            constraint: Optional[float]) -> RankTotals:
    """Greedy ledger walk over pre-ordered candidates.

    A candidate is taken while spend-so-far stays under budget and, when a
    constraint is set, the running cost/value ratio stays strictly under it
    (a zero-value ledger satisfies any constraint). A rejected candidate
    freezes the ledgers, so rejection ends the walk and the accepted set is
    a prefix; exclusive prefix sums reproduce the walk exactly.
    """
    if len(c_ord) == 0:
        return RankTotals()
    spend = c_ord / 1000.0
    cost_excl = np.concatenate(([0.0], np.cumsum(spend)[:-1]))
    ok = cost_excl < budget
    if constraint is not None:
        ecpm_excl = np.concatenate(([0.0], np.cumsum(c_ord)[:-1]))
        value_excl = np.concatenate(([0.0], np.cumsum(v_ord)[:-1]))
        ratio_ok = np.ones(len(c_ord), dtype=bool)
        nz = value_excl > 0
        ratio_ok[nz] = (ecpm_excl[nz] / value_excl[nz]) < constraint
        ok &= ratio_ok
    if ok.all():
        k = len(c_ord)
    else:
        k = int(np.argmin(ok))
    return RankTotals(
        impression=float(k),
        click=float(np.sum(click_ord[:k])),
        cost=float(np.sum(spend[:k])),
        value=float(np.sum(v_ord[:k])),
    )


def rank_manual(matched: MatchedAuctions, criteria: CampaignCriteria,
                keep: Optional[np.ndarray] = None,
                click_basis: Optional[np.ndarray] = None) -> RankTotals:
    """Manual-bidding rank phase.

    Walks the matched set in (hour, request_id) order; an auction is won
    when the campaign's bid strictly beats the market price and spend so
    far is still under budget. The optional per-auction arrays serve the
    true-delivery simulator: `keep` masks auctions lost to throttling and
    `click_basis` overrides the expected-click weight (default: joined
    pctr).
    """
    order = np.lexsort((matched.request_id, matched.hour))
    bid = manual_bid(criteria.bidding_type, criteria.bidprice,
                     matched.pctr, matched.pcvr)
    win = bid[order] > matched.c[order]
    if keep is not None:
        win &= keep[order]
    rows = order[win]
    clicks = matched.pctr if click_basis is None else click_basis
    return _accepted_prefix_totals(matched.c[rows], clicks[rows],
                                   matched.v[rows], criteria.budget,
                                   constraint=None)


def rank_auto(matched: MatchedAuctions, criteria: CampaignCriteria,
              keep: Optional[np.ndarray] = None,
              click_basis: Optional[np.ndarray] = None) -> RankTotals:
    """Automatic-bidding rank phase.

    Candidates are taken greedily in ascending cost-per-value order (ties
    broken by request id) while budget remains; MCB additionally requires
    the running cost/value ratio, on the eCPM price basis, to stay under
    the campaign constraint. `keep` and `click_basis` as in rank_manual.
    """
    with np.errstate(divide="ignore"):
        ratio = matched.c / matched.v
    order = np.lexsort((matched.request_id, ratio))
    if keep is not None:
        order = order[keep[order]]
    constraint = (criteria.constraint
                  if criteria.bidding_type is BiddingType.MCB else None)
    clicks = matched.pctr if click_basis is None else click_basis
    return _accepted_prefix_totals(matched.c[order], clicks[order],
                                   matched.v[order], criteria.budget,
                                   constraint)


def prorate_and_scale(totals: RankTotals, budget: float,
                      scale_factor: float) -> RankTotals:
    """Cap spend at the budget, prorating all outputs, then scale every
    output by the down-sampling factor."""
    impression, click, cost, value = (totals.impression, totals.click,
                                      totals.cost, totals.value)
    if cost > budget:
        f = budget / cost
        impression *= f
        click *= f
        value *= f
        cost = budget
    return RankTotals(
        impression=impression * scale_factor,
        click=click * scale_factor,
        cost=cost * scale_factor,
        value=value * scale_factor,
    )


def replay(criteria: CampaignCriteria, index: LogIndex,
           scale_factor: float = 1.0) -> ReplayResult:
    """Forecast base campaign performance by replaying the log.

    Validates criteria, matches, ranks under the campaign's bidding type,
    prorates to budget and scales up by the down-sampling factor.
    """
    validate_criteria(criteria)
    matched = match_phase(criteria, index)
    if criteria.is_manual():
        totals = rank_manual(matched, criteria)
    else:
        totals = rank_auto(matched, criteria)
    totals = prorate_and_scale(totals, criteria.budget, scale_factor)
    return ReplayResult(
        impression=totals.impression, click=totals.click,
        cost=totals.cost, value=totals.value,
        match_stats=matched.stats, scale_factor=scale_factor,
    )
