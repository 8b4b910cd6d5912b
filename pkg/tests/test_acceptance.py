"""Acceptance suite.

One test per acceptance criterion, in criterion order; `pytest -v` prints
one PASS/FAIL line per criterion. Each test also prints a `[PASS]` detail
line (visible with -s, or on failure) with the measured quantities.

The heavyweight fixtures are shared: the two full pipeline runs back the
directional-accuracy, correlation, and reproducibility criteria; the
100k-record service snapshot backs the latency criterion. Budget-safety
checks accumulate across every property run in this module and are
asserted once.
"""

import dataclasses
import threading
import time

import numpy as np
import pytest

from adforecast.calibrate.mmoe import MmoeConfig, MmoeNet, gradient_check
from adforecast.dataset import (SamplerConfig, build_full_index,
                                sample_criteria)
from adforecast.evaluation.metrics import pearson_matrix, ratio_p, \
    weighted_mape
from adforecast.pipeline import PipelineConfig, run_pipeline
from adforecast.replay.criteria import BiddingType
from adforecast.replay.engine import replay
from adforecast.synthlog.logs import LogConfig, gen_day_logs
from adforecast.synthlog.world import WorldConfig, gen_world
from adforecast.urf.features import gen_action_log
from adforecast.urf.fm import FmTrainConfig, evaluate_urf
from adforecast.urf.model import train_urf

from conftest import make_tiny_index, random_tiny_criteria
from instances import AXES, sample_monotone_pairs
from oracles import oracle_pearson, oracle_replay

# Budget-safety evidence accumulated by every property loop in this module.
BUDGET_LEDGER = {"checked": 0, "violations": 0, "worst_excess": 0.0}


def _track_budget(result, criteria, scale):
    BUDGET_LEDGER["checked"] += 1
    excess = result.cost - criteria.budget * scale
    if excess > 1e-9:
        BUDGET_LEDGER["violations"] += 1
    BUDGET_LEDGER["worst_excess"] = max(BUDGET_LEDGER["worst_excess"],
                                        excess)


def _passline(name, detail):
    print(f"\n[PASS] {name}: {detail}")


def _criteria_as_dict(criteria):
    d = dataclasses.asdict(criteria)
    d["bidding_type"] = criteria.bidding_type.value
    d["objective"] = criteria.objective.value
    return d


def _auctions_as_dicts(parts):
    return [dataclasses.asdict(r) for r in parts["auctions"]]


# --------------------------------------------------------------------------
# Criterion 1: oracle equivalence of the replay engine.
# --------------------------------------------------------------------------

def test_c01_oracle_equivalence():
    rng = np.random.default_rng(1001)
    started = time.perf_counter()
    n_campaigns = 0
    worst = 0.0
    while n_campaigns < 1000:
        parts = make_tiny_index(rng, int(rng.integers(1, 51)))
        auction_dicts = _auctions_as_dicts(parts)
        for _ in range(5):
            criteria = random_tiny_criteria(rng, parts)
            scale = float(rng.choice([1.0, 2.0, 4.0]))
            got = replay(criteria, parts["index"], scale_factor=scale)
            want = oracle_replay(_criteria_as_dict(criteria), auction_dicts,
                                 parts["tag_users"], parts["scores"], scale)
            for fld, expected in zip(("impression", "click", "cost", "value"),
                                     want):
                diff = abs(getattr(got, fld) - expected)
                worst = max(worst, diff)
                assert diff <= 1e-9, (fld, criteria)
            _track_budget(got, criteria, scale)
            n_campaigns += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    _passline("oracle equivalence",
              f"{n_campaigns} campaigns, worst |diff| {worst:.2e}, "
              f"{elapsed:.1f}s")


# --------------------------------------------------------------------------
# Criterion 2: monotonicity along budget / bidprice / tags / hours.
# --------------------------------------------------------------------------

def test_c02_monotonicity():
    rng = np.random.default_rng(1002)
    violations = 0
    n_pairs = {}
    for axis in AXES:
        pairs = sample_monotone_pairs(rng, axis, n_pairs=500)
        n_pairs[axis] = len(pairs)
        assert len(pairs) == 500, axis
        for lo_c, hi_c, index in pairs:
            lo = replay(lo_c, index)
            hi = replay(hi_c, index)
            for fld in ("impression", "click", "cost", "value"):
                if getattr(hi, fld) < getattr(lo, fld) - 1e-9:
                    violations += 1
            _track_budget(lo, lo_c, 1.0)
            _track_budget(hi, hi_c, 1.0)
    assert violations == 0
    _passline("monotonicity",
              f"500 ordered pairs per axis {list(n_pairs)}, 0 violations")


# --------------------------------------------------------------------------
# Criterion 4: BCB invariance under uniform pctr scaling.
# --------------------------------------------------------------------------

def test_c04_bcb_scaling_invariance():
    rng = np.random.default_rng(1004)
    n_checked = 0
    while n_checked < 100:
        parts = make_tiny_index(rng, int(rng.integers(10, 51)))
        criteria = random_tiny_criteria(rng, parts, require_manual=False)
        if criteria.bidding_type is not BiddingType.BCB:
            criteria = dataclasses.replace(criteria,
                                           bidding_type=BiddingType.BCB,
                                           constraint=None)
        base = replay(criteria, parts["index"])
        if base.impression == 0:
            continue
        _track_budget(base, criteria, 1.0)
        for d in (0.8, 0.9, 1.1, 1.2):
            scaled = replay(criteria, parts["index"].with_pctr_scale(d))
            assert scaled.impression == base.impression, d
            assert scaled.cost == base.cost, d
            assert abs(scaled.click / d - base.click) <= 1e-9, d
            _track_budget(scaled, criteria, 1.0)
        n_checked += 1
    _passline("BCB scaling invariance",
              f"{n_checked} BCB campaigns x 4 disturbance factors")


# --------------------------------------------------------------------------
# Criterion 3: budget safety across every property run above.
# (Defined after criteria 1/2/4 so their evidence has accumulated.)
# --------------------------------------------------------------------------

def test_c03_budget_safety():
    assert BUDGET_LEDGER["checked"] >= 5000
    assert BUDGET_LEDGER["violations"] == 0
    _passline("budget safety",
              f"{BUDGET_LEDGER['checked']} replays, 0 violations, worst "
              f"cost-minus-bound {BUDGET_LEDGER['worst_excess']:.2e}")


# --------------------------------------------------------------------------
# Criterion 5: MMoE gate simplex and analytic gradients.
# --------------------------------------------------------------------------

def test_c05_mmoe_correctness():
    rng = np.random.default_rng(1005)
    n_inputs = 0
    for _ in range(5):
        net = MmoeNet(MmoeConfig(n_inputs=7, n_tasks=3, n_experts=4,
                                 expert_hidden=6, tower_hidden=4), rng)
        X = rng.normal(size=(200, 7)) * rng.uniform(0.1, 10)
        gates = net.gates(X)
        assert np.all(gates >= 0)
        assert np.max(np.abs(gates.sum(axis=2) - 1.0)) <= 1e-9
        n_inputs += X.shape[0]
    assert n_inputs >= 1000

    worst = 0.0
    for i in range(20):
        net = MmoeNet(MmoeConfig(n_inputs=4, n_tasks=3, n_experts=2,
                                 expert_hidden=3, tower_hidden=2),
                      np.random.default_rng(300 + i))
        for arr in net.params.values():
            arr += np.random.default_rng(400 + i).normal(size=arr.shape) * 0.2
        X = np.random.default_rng(500 + i).normal(size=(5, 4))
        Z = np.random.default_rng(600 + i).normal(size=(5, 3))
        worst = max(worst, gradient_check(net, X, Z))
    assert worst < 1e-4
    _passline("MMoE correctness",
              f"gate simplex on {n_inputs} inputs; gradient check over 20 "
              f"models, max rel err {worst:.2e}")


# --------------------------------------------------------------------------
# Criteria 6, 7, 11 share two full pipeline runs at the default seed.
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance-pipeline")
    runs = []
    for name in ("first", "second"):
        config = PipelineConfig(out_dir=str(root / name))
        started = time.perf_counter()
        result = run_pipeline(config)
        runs.append((config, result, time.perf_counter() - started))
    return runs


def _cell_mape(report, method, group, indicator):
    return report.cell(method, group, indicator).mape


def test_c06_directional_accuracy(pipeline_runs):
    config, result, elapsed = pipeline_runs[0]
    report = result.report
    assert config.n_train >= 5000 and config.n_eval >= 500
    checked = []
    for group, indicators in (("manual", ("impression", "click", "cost")),
                              ("automatic", ("impression", "click"))):
        for ind in indicators:
            rep = _cell_mape(report, "REPLAY", group, ind)
            m1 = _cell_mape(report, "MTL_1", group, ind)
            mn = _cell_mape(report, "MTL_N", group, ind)
            assert mn is not None and m1 is not None and rep is not None
            assert mn <= m1, (group, ind, mn, m1)
            assert m1 < rep, (group, ind, m1, rep)
            improvement = 1.0 - mn / rep
            assert improvement >= 0.30, (group, ind, improvement)
            checked.append(f"{group[:3]}/{ind[:3]} {mn:.3f}<={m1:.3f}<"
                           f"{rep:.3f} (+{improvement:.0%})")
    auto_cost = report.cell("MTL_N", "automatic", "cost")
    assert auto_cost.mape is None  # budget-bound, reported as "/"
    assert report.bcb_budget_mape is not None
    assert report.bcb_budget_mape <= 0.2
    assert elapsed < 15 * 60
    _passline("directional accuracy",
              "; ".join(checked) + f"; bcb {report.bcb_budget_mape:.3f}; "
              f"pipeline {elapsed:.0f}s")


def test_c07_pearson_range(pipeline_runs):
    _, result, _ = pipeline_runs[0]
    p = result.report.pearson
    pairs = {"impression-click": p[0, 1], "impression-cost": p[0, 2],
             "click-cost": p[1, 2]}
    for name, value in pairs.items():
        assert 0.6 <= value <= 0.95, (name, value)
    _passline("pearson range",
              ", ".join(f"{k} {v:.3f}" for k, v in pairs.items()))


# --------------------------------------------------------------------------
# Criterion 8: metric unit values.
# --------------------------------------------------------------------------

def test_c08_metric_units():
    m = weighted_mape(np.array([1.0, 1.0]), np.array([1.5, 1.1]),
                      np.array([1.0, 3.0]))
    assert m.value == pytest.approx(0.2, abs=1e-12)

    r = ratio_p(np.array([1.0, 1.0, 1.0]), np.array([1.5, 1.4, 1.6]), p=0.5)
    assert r.value == pytest.approx(1.0 / 3.0, abs=1e-12)

    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    y = np.array([1.2, 2.3, 2.9, 4.4, 5.4])
    rho = pearson_matrix(np.stack([x, y], axis=1))[0, 1]
    assert rho == pytest.approx(0.9934, abs=1e-3)
    assert rho == pytest.approx(oracle_pearson(x.tolist(), y.tolist()),
                                abs=1e-12)
    _passline("metric units",
              f"weighted_mape 0.2, ratio_0.5 1/3, pearson {rho:.6f}")


# --------------------------------------------------------------------------
# Criterion 9: URF quality against the generator's Bayes-optimal scores.
# --------------------------------------------------------------------------

def test_c09_urf_sanity():
    world = gen_world(WorldConfig(n_users=300, n_tags=30, n_advertisers=8,
                                  n_areas=4, n_adzones=4), seed=41)
    train = gen_action_log(world, n_events=40000, seed=42)
    holdout = gen_action_log(world, n_events=20000, seed=43)
    model = train_urf(world, train, FmTrainConfig(), seed=44)
    scores, _ = model.predict(holdout.idx, holdout.dense)
    model_auc = evaluate_urf(scores, holdout.click).auc
    bayes_auc = evaluate_urf(holdout.true_pctr, holdout.click).auc
    assert abs(bayes_auc - model_auc) <= 0.05

    permuted = np.random.default_rng(45).permutation(holdout.click)
    null_auc = evaluate_urf(scores, permuted).auc
    assert 0.45 <= null_auc <= 0.55
    _passline("URF sanity",
              f"model auc {model_auc:.4f} vs bayes {bayes_auc:.4f} "
              f"(gap {bayes_auc - model_auc:+.4f}); permuted {null_auc:.4f}")


# --------------------------------------------------------------------------
# Criterion 10: p95 service latency against a 100k-record index.
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def big_snapshot():
    from adforecast.calibrate.features import build_calib_input
    from adforecast.calibrate.forecast import train_calibrator
    from adforecast.calibrate.mmoe import TrainConfig
    from adforecast.service.app import Snapshot

    world = gen_world(WorldConfig(), seed=51)
    records = gen_day_logs(world, LogConfig(n_requests=100000,
                                            sample_rate=0.25), seed=52)
    actions = gen_action_log(world, n_events=30000, seed=53)
    urf = train_urf(world, actions, FmTrainConfig(epochs=3), seed=54)
    index = build_full_index(world, records, urf)

    rng = np.random.default_rng(55)
    sampler = SamplerConfig()
    inputs, labels = [], []
    while len(inputs) < 60:
        criteria = sample_criteria(world, index, rng, sampler)
        result = replay(criteria, index, scale_factor=4.0)
        if result.impression <= 0:
            continue
        inputs.append(build_calib_input(criteria, result))
        labels.append([result.impression * float(rng.uniform(0.6, 1.6)),
                       result.click * float(rng.uniform(0.6, 1.6)),
                       result.cost * float(rng.uniform(0.6, 1.6))])
    model = train_calibrator(
        inputs, np.asarray(labels), kind="mmoe",
        train_config=TrainConfig(max_epochs=4, patience=2, batch_size=16),
        n_experts=2, expert_hidden=4, tower_hidden=3, seed=56)
    return world, Snapshot(index=index, model=model, scale_factor=4.0,
                           log_date="2026-01-01")


def test_c10_service_latency(big_snapshot):
    import socket

    import httpx
    import uvicorn

    from adforecast.replay.criteria import criteria_to_dict
    from adforecast.service.app import ServiceState, create_app

    world, snapshot = big_snapshot
    assert len(snapshot.index) >= 100000
    state = ServiceState()
    state.swap(snapshot)
    app = create_app(state)

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("service did not start")
        time.sleep(0.05)
    try:
        rng = np.random.default_rng(57)
        sampler = SamplerConfig()
        latencies = []
        with httpx.Client(base_url=f"http://127.0.0.1:{port}",
                          timeout=30.0) as client:
            assert client.get("/health").json() == {"status": "ready"}
            for _ in range(200):
                criteria = sample_criteria(world, snapshot.index, rng,
                                           sampler)
                started = time.perf_counter()
                resp = client.post("/forecast",
                                   json=criteria_to_dict(criteria))
                latencies.append((time.perf_counter() - started) * 1000.0)
                assert resp.status_code == 200, resp.text
    finally:
        server.should_exit = True
        thread.join(timeout=10)
    p95 = float(np.percentile(latencies, 95))
    assert p95 < 2000.0
    _passline("service latency",
              f"p95 {p95:.0f}ms, max {max(latencies):.0f}ms over "
              f"{len(latencies)} requests, {len(snapshot.index)} records")


# --------------------------------------------------------------------------
# Criterion 11: byte-identical report.csv across same-seed pipeline runs.
# --------------------------------------------------------------------------

def test_c11_reproducibility(pipeline_runs):
    (_, first, _), (_, second, _) = pipeline_runs
    with open(first.paths["report_csv"], "rb") as fh:
        a = fh.read()
    with open(second.paths["report_csv"], "rb") as fh:
        b = fh.read()
    assert a == b
    _passline("reproducibility",
              f"report.csv identical across runs ({len(a)} bytes)")
