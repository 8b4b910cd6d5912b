"""Ground-truth simulator: degenerate equality, knob semantics, determinism."""

import dataclasses

import numpy as np
import pytest

from adforecast.dataset import build_full_index, sample_criteria
from adforecast.errors import ConfigError, CriteriaError
from adforecast.replay.criteria import (BiddingType, CampaignCriteria,
                                        Objective)
from adforecast.replay.engine import replay
from adforecast.synthlog.io import LogManifest
from adforecast.synthlog.simulator import (StrategyConfig, TruePerformance,
                                           _world_pctr_rows,
                                           simulate_true_delivery)
from adforecast.synthlog.world import true_pctr


@pytest.fixture(scope="module")
def truth_index(small_world, small_auctions, small_urf):
    """Full-coverage index with every record in the sampled bucket, so the
    plain replay path and the full-day simulation see identical records."""
    all_sampled = [dataclasses.replace(r, sampled=True)
                   for r in small_auctions]
    manifest = LogManifest(log_date="2026-01-01", n_requests=3000,
                           sample_rate=1.0, seed=11)
    return build_full_index(small_world, all_sampled, small_urf,
                            manifest=manifest)


def world_criteria(world, bidding_type=BiddingType.CPM, budget=1e9,
                   bidprice=1e6, constraint=None, tags=None,
                   objective=Objective.CLICK, advertiser=None):
    """A campaign over the whole small world; defaults win every auction
    with budget to spare, so keep-chain effects show through undamped."""
    return CampaignCriteria(
        advertiser_id=advertiser or world.advertiser_ids()[0],
        hours=tuple(range(24)), areas=tuple(world.areas),
        adzones=tuple(world.adzones),
        targeting_tags=tags or tuple(sorted(world.tags)),
        objective=objective, bidding_type=bidding_type, budget=budget,
        bidprice=bidprice, constraint=constraint)


def neutral(**overrides) -> StrategyConfig:
    return dataclasses.replace(StrategyConfig.degenerate(), **overrides)


class TestDegenerateEquality:
    def test_matches_replay_exactly(self, small_world, truth_index):
        rng = np.random.default_rng(61)
        degenerate = StrategyConfig.degenerate()
        n_nonzero = 0
        for i in range(40):
            criteria = sample_criteria(small_world, truth_index, rng)
            truth = simulate_true_delivery(criteria, small_world,
                                           truth_index, degenerate, seed=i)
            base = replay(criteria, truth_index, scale_factor=1.0)
            assert truth.impression == base.impression
            assert truth.click == base.click
            assert truth.cost == base.cost
            n_nonzero += truth.impression > 0
        assert n_nonzero > 10  # the equality must be exercised on real wins

    def test_neutral_knob_values_change_nothing(self, small_world,
                                                truth_index):
        criteria = world_criteria(small_world, BiddingType.CPC, bidprice=1e4)
        a = simulate_true_delivery(criteria, small_world, truth_index,
                                   StrategyConfig.degenerate(), seed=3)
        b = simulate_true_delivery(criteria, small_world, truth_index,
                                   neutral(tier_throttle=0.0,
                                           pacing_depth=0.0), seed=3)
        assert a == b


class TestDeterminism:
    def test_same_seeds_same_output(self, small_world, truth_index):
        criteria = world_criteria(small_world, BiddingType.BCB,
                                  bidprice=None, budget=0.05)
        strategy = StrategyConfig(price_drift=0.2, render_loss=0.3,
                                  tier_throttle=0.3, campaign_noise=0.2,
                                  seed=5)
        a = simulate_true_delivery(criteria, small_world, truth_index,
                                   strategy, seed=9)
        b = simulate_true_delivery(criteria, small_world, truth_index,
                                   strategy, seed=9)
        assert a == b

    def test_campaign_seed_moves_jitter(self, small_world, truth_index):
        criteria = world_criteria(small_world)
        strategy = neutral(pacing_jitter=0.5)
        outs = {simulate_true_delivery(criteria, small_world, truth_index,
                                       strategy, seed=s).impression
                for s in range(5)}
        assert len(outs) > 1

    def test_platform_seed_moves_drift(self, small_world, truth_index):
        criteria = world_criteria(small_world)
        costs = {simulate_true_delivery(
            criteria, small_world, truth_index,
            neutral(price_drift=0.3, seed=s), seed=1).cost
            for s in range(3)}
        assert len(costs) == 3


class TestKnobSemantics:
    def test_calibration_shift_scales_cpm_clicks(self, small_world,
                                                 truth_index):
        criteria = world_criteria(small_world, BiddingType.CPM)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=2)
        shifted = simulate_true_delivery(
            criteria, small_world, truth_index,
            neutral(pctr_calibration_shift=1.3), seed=2)
        assert shifted.impression == base.impression
        assert shifted.cost == base.cost
        assert shifted.click == pytest.approx(1.3 * base.click, rel=1e-9)

    def test_tier_moves_counts_not_auto_spend(self, small_world,
                                              truth_index):
        criteria = world_criteria(small_world, BiddingType.BCB,
                                  bidprice=None)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=4)
        tiered = simulate_true_delivery(criteria, small_world, truth_index,
                                        neutral(tier_throttle=0.5), seed=4)
        assert tiered.cost == base.cost
        m = tiered.impression / base.impression
        assert m != 1.0
        assert tiered.click == pytest.approx(m * base.click, rel=1e-12)

    def test_tier_scales_manual_uniformly(self, small_world, truth_index):
        criteria = world_criteria(small_world, BiddingType.CPC,
                                  bidprice=1e4)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=4)
        tiered = simulate_true_delivery(criteria, small_world, truth_index,
                                        neutral(tier_throttle=0.5), seed=4)
        m = tiered.impression / base.impression
        assert m != 1.0
        assert tiered.click == pytest.approx(m * base.click, rel=1e-12)
        assert tiered.cost == pytest.approx(m * base.cost, rel=1e-12)

    def test_render_loss_shrinks_unbound_delivery(self, small_world,
                                                  truth_index):
        criteria = world_criteria(small_world, BiddingType.CPC,
                                  bidprice=1e4)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=6)
        lossy = simulate_true_delivery(criteria, small_world, truth_index,
                                       neutral(render_loss=0.6), seed=6)
        assert lossy.impression < base.impression
        assert lossy.click < base.click
        assert lossy.cost < base.cost  # failed renders are not billed

    def test_pacing_depth_skips_automatic(self, small_world, truth_index):
        criteria = world_criteria(small_world, BiddingType.MCB,
                                  bidprice=None, budget=0.05,
                                  constraint=1e9)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=8)
        paced = simulate_true_delivery(criteria, small_world, truth_index,
                                       neutral(pacing_depth=0.7), seed=8)
        assert paced == base

    def test_pacing_depth_throttles_manual(self, small_world, truth_index):
        criteria = world_criteria(small_world)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=8)
        paced = simulate_true_delivery(criteria, small_world, truth_index,
                                       neutral(pacing_depth=0.7), seed=8)
        assert paced.impression < base.impression

    def test_campaign_noise_spares_auto_spend(self, small_world,
                                              truth_index):
        criteria = world_criteria(small_world, BiddingType.BCB,
                                  bidprice=None)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=10)
        noisy = simulate_true_delivery(criteria, small_world, truth_index,
                                       neutral(campaign_noise=0.5), seed=10)
        assert noisy.cost == base.cost
        assert noisy.impression != base.impression
        assert noisy.click != base.click

    def test_campaign_noise_moves_manual_billing(self, small_world,
                                                 truth_index):
        criteria = world_criteria(small_world)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=10)
        noisy = simulate_true_delivery(criteria, small_world, truth_index,
                                       neutral(campaign_noise=0.5), seed=10)
        assert noisy.cost != base.cost

    def test_price_drift_moves_cost_only_under_sure_wins(self, small_world,
                                                         truth_index):
        criteria = world_criteria(small_world)  # bids clear any drifted price
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=12)
        drifted = simulate_true_delivery(criteria, small_world, truth_index,
                                         neutral(price_drift=0.3), seed=12)
        assert drifted.impression == base.impression
        assert drifted.click == base.click
        assert drifted.cost != base.cost

    def test_world_click_model_changes_click_only(self, small_world,
                                                  truth_index):
        criteria = world_criteria(small_world)
        base = simulate_true_delivery(criteria, small_world, truth_index,
                                      StrategyConfig.degenerate(), seed=14)
        worldly = simulate_true_delivery(criteria, small_world, truth_index,
                                         neutral(world_click_model=True),
                                         seed=14)
        assert worldly.impression == base.impression
        assert worldly.cost == base.cost
        assert worldly.click != base.click
        assert worldly.click > 0


class TestAudienceMonotonicity:
    def test_boosted_tag_superset_reaches_more(self, small_world,
                                               truth_index):
        behavior = sorted(t for t in small_world.tags if t.startswith("bh:"))
        small = tuple(behavior[:2])
        big = tuple(behavior[:6])
        strategy = neutral(parallel_retrieval_boost={
            "profile": 0.5, "behavior": 0.5, "mixed": 0.5})
        for seed in range(6):
            lo = simulate_true_delivery(
                world_criteria(small_world, tags=small), small_world,
                truth_index, strategy, seed=seed)
            hi = simulate_true_delivery(
                world_criteria(small_world, tags=big), small_world,
                truth_index, strategy, seed=seed)
            assert hi.impression >= lo.impression
            assert hi.click >= lo.click - 1e-9
            assert hi.cost >= lo.cost - 1e-9


class TestWorldPctrRows:
    def test_agrees_with_scalar_route(self, small_world, truth_index):
        idx = truth_index
        pos_to_user = {pos: uid for uid, pos in idx.users.items()}
        pos_to_zone = {pos: zid for zid, pos in idx.adzones.items()}
        rows = np.arange(12)
        adv = small_world.advertiser_ids()[1]
        got = _world_pctr_rows(small_world, idx, rows, adv)
        for r in rows:
            want = true_pctr(small_world, pos_to_user[int(idx.user_idx[r])],
                             adv, int(idx.hour[r]),
                             pos_to_zone[int(idx.adzone_idx[r])])
            assert got[int(r)] == pytest.approx(want, rel=1e-12)


class TestValidation:
    @pytest.mark.parametrize("bad", [
        dict(pctr_calibration_shift=0.0),
        dict(pacing_jitter=1.5),
        dict(pacing_depth=1.0),
        dict(price_drift=-0.1),
        dict(render_loss=1.0),
        dict(tier_throttle=-0.2),
        dict(campaign_noise=-0.1),
        dict(parallel_retrieval_boost={"behavior": -0.3}),
    ])
    def test_bad_strategy_rejected(self, small_world, truth_index, bad):
        criteria = world_criteria(small_world)
        with pytest.raises(ConfigError):
            simulate_true_delivery(criteria, small_world, truth_index,
                                   neutral(**bad), seed=0)

    def test_criteria_validated(self, small_world, truth_index):
        criteria = world_criteria(small_world, budget=-1.0)
        with pytest.raises(CriteriaError):
            simulate_true_delivery(criteria, small_world, truth_index,
                                   StrategyConfig.degenerate(), seed=0)

    def test_round_trip(self):
        perf = TruePerformance(impression=3.5, click=0.25, cost=0.01)
        assert TruePerformance.from_dict(perf.to_dict()) == perf
