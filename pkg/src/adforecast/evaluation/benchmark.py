"""Benchmark reports: methods x bidding groups x indicators.

The dataset rows pair each campaign's criteria with its replayed base
performance and its true delivered performance. The benchmark scores the
raw replay plus any calibrated methods on cost-weighted mape and ratio_0.5
per indicator, split into manual and automatic bidding groups. Cost under
budget constrained bidding is budget-bound by construction, so calibrated
methods report "/" for automatic cost and the budget-bound forecast is
checked separately.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..calibrate.forecast import CalibModel, calibrate_forecast
from ..errors import DataIntegrityError, UndefinedMetricError
from ..replay.criteria import (BiddingType, CampaignCriteria,
                               criteria_from_dict, criteria_to_dict)
from ..replay.engine import LogIndex, ReplayResult, replay
from ..synthlog.simulator import TruePerformance
from .metrics import MetricValue, pearson_matrix, ratio_p, weighted_mape

INDICATORS = ("impression", "click", "cost")
GROUPS = ("manual", "automatic")
REPLAY_METHOD = "REPLAY"


@dataclass
class DatasetRow:
    campaign_id: str
    criteria: CampaignCriteria
    replay: ReplayResult
    truth: TruePerformance

    def to_dict(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "criteria": criteria_to_dict(self.criteria),
            "replay": self.replay.to_dict(),
            "truth": self.truth.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DatasetRow":
        return cls(
            campaign_id=str(obj["campaign_id"]),
            criteria=criteria_from_dict(obj["criteria"]),
            replay=ReplayResult.from_dict(obj["replay"]),
            truth=TruePerformance.from_dict(obj["truth"]),
        )


def write_dataset(path: str, rows: Sequence[DatasetRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_dict(), separators=(",", ":"),
                                sort_keys=True))
            fh.write("\n")


def read_dataset(path: str) -> List[DatasetRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(DatasetRow.from_dict(json.loads(line)))
    return rows


# A method maps (criteria, replay result) to forecast (impression, click, cost).
Forecaster = Callable[[CampaignCriteria, ReplayResult], np.ndarray]


def replay_forecaster(criteria: CampaignCriteria,
                      replay_result: ReplayResult) -> np.ndarray:
    return np.array([replay_result.impression, replay_result.click,
                     replay_result.cost])


def model_forecaster(model: CalibModel) -> Forecaster:
    def run(criteria: CampaignCriteria, replay_result: ReplayResult) -> np.ndarray:
        f = calibrate_forecast(model, criteria, replay_result)
        return np.array([f.impression, f.click, f.cost])
    return run


@dataclass
class ReportCell:
    method: str
    group: str
    indicator: str
    mape: Optional[float]       # None renders as "/" (budget-bound cost)
    ratio: Optional[float]
    n_used: int = 0
    n_excluded: int = 0


@dataclass
class EvalReport:
    cells: List[ReportCell]
    pearson: Optional[np.ndarray]
    bcb_budget_mape: Optional[float]   # budget-bound cost forecast vs truth
    n_campaigns: Dict[str, int] = field(default_factory=dict)

    def cell(self, method: str, group: str, indicator: str) -> ReportCell:
        for c in self.cells:
            if (c.method, c.group, c.indicator) == (method, group, indicator):
                return c
        raise KeyError((method, group, indicator))


def _group_of(criteria: CampaignCriteria) -> str:
    return "manual" if criteria.is_manual() else "automatic"


def benchmark(eval_rows: Sequence[DatasetRow],
              methods: Dict[str, Optional[Forecaster]],
              train_ids: Optional[set] = None) -> EvalReport:
    """Score every method on the evaluation rows.

    methods maps display name to forecaster; None means the raw replay.
    train_ids, when given, guards split hygiene: any overlap with the
    evaluation campaign ids raises DataIntegrityError.
    """
    if train_ids:
        overlap = train_ids & {r.campaign_id for r in eval_rows}
        if overlap:
            raise DataIntegrityError(
                f"evaluation split overlaps training split: "
                f"{sorted(overlap)[:3]}...")
    by_group: Dict[str, List[DatasetRow]] = {g: [] for g in GROUPS}
    for row in eval_rows:
        by_group[_group_of(row.criteria)].append(row)

    cells: List[ReportCell] = []
    for name, forecaster in methods.items():
        fn = forecaster or replay_forecaster
        for group in GROUPS:
            rows = by_group[group]
            if not rows:
                continue
            truths = np.array([[r.truth.impression, r.truth.click,
                                r.truth.cost] for r in rows])
            preds = np.array([fn(r.criteria, r.replay) for r in rows])
            weights = truths[:, 2]
            for j, indicator in enumerate(INDICATORS):
                budget_bound = (group == "automatic" and indicator == "cost"
                                and name != REPLAY_METHOD)
                if budget_bound:
                    cells.append(ReportCell(name, group, indicator,
                                            mape=None, ratio=None))
                    continue
                try:
                    m = weighted_mape(truths[:, j], preds[:, j], weights)
                    r = ratio_p(truths[:, j], preds[:, j], p=0.5)
                    cells.append(ReportCell(name, group, indicator,
                                            mape=m.value, ratio=r.value,
                                            n_used=m.n_used,
                                            n_excluded=m.n_excluded))
                except UndefinedMetricError:
                    cells.append(ReportCell(name, group, indicator,
                                            mape=None, ratio=None))

    bcb_rows = [r for r in eval_rows
                if r.criteria.bidding_type is BiddingType.BCB]
    bcb_budget_mape = None
    if bcb_rows:
        truths = np.array([r.truth.cost for r in bcb_rows])
        bound = np.array([min(r.criteria.budget, r.replay.cost)
                          for r in bcb_rows])
        weights = truths.copy()
        try:
            bcb_budget_mape = weighted_mape(truths, bound, weights).value
        except UndefinedMetricError:
            bcb_budget_mape = None

    all_truths = np.array([[r.truth.impression, r.truth.click, r.truth.cost]
                           for r in eval_rows])
    try:
        pearson = pearson_matrix(all_truths)
    except UndefinedMetricError:
        pearson = None
    counts = {g: len(by_group[g]) for g in GROUPS}
    counts["total"] = len(eval_rows)
    return EvalReport(cells=cells, pearson=pearson,
                      bcb_budget_mape=bcb_budget_mape, n_campaigns=counts)


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else format(float(x), ".10g")


def write_report_csv(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "option", "indicator", "mape", "ratio_05"])
        for c in report.cells:
            writer.writerow([c.method, c.group, c.indicator,
                             _fmt(c.mape), _fmt(c.ratio)])


def write_report_md(report: EvalReport, path: str) -> None:
    methods = []
    for c in report.cells:
        if c.method not in methods:
            methods.append(c.method)
    lines = ["# Forecast accuracy", ""]
    for group in GROUPS:
        lines.append(f"## {group.capitalize()} bidding")
        lines.append("")
        header = "| method | " + " | ".join(
            f"{ind} mape | {ind} ratio_0.5" for ind in INDICATORS) + " |"
        sep = "|" + "---|" * (1 + 2 * len(INDICATORS))
        lines.extend([header, sep])
        for method in methods:
            parts = [method]
            for ind in INDICATORS:
                try:
                    c = report.cell(method, group, ind)
                except KeyError:
                    parts.extend(["/", "/"])
                    continue
                parts.append("/" if c.mape is None else f"{c.mape:.4f}")
                parts.append("/" if c.ratio is None else f"{c.ratio * 100:.1f}%")
            lines.append("| " + " | ".join(parts) + " |")
        lines.append("")
    if report.bcb_budget_mape is not None:
        lines.append(f"Budget-bound BCB cost forecast mape: "
                     f"{report.bcb_budget_mape:.4f}")
        lines.append("")
    counts = report.n_campaigns
    lines.append(f"Campaigns: {counts.get('total', 0)} total, "
                 f"{counts.get('manual', 0)} manual, "
                 f"{counts.get('automatic', 0)} automatic.")
    lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def write_pearson_csv(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([""] + list(INDICATORS))
        if report.pearson is not None:
            for i, ind in enumerate(INDICATORS):
                writer.writerow([ind] + [_fmt(v) for v in report.pearson[i]])


@dataclass
class DisturbancePoint:
    d: float
    method: str
    group: str
    indicator: str
    mape: Optional[float]
    ratio: Optional[float]


DEFAULT_DISTURBANCES = (-0.20, -0.15, -0.10, -0.05, 0.0,
                        0.05, 0.10, 0.15, 0.20)


def disturbance_sweep(eval_rows: Sequence[DatasetRow], index: LogIndex,
                      model: Optional[CalibModel],
                      disturbances: Sequence[float] = DEFAULT_DISTURBANCES,
                      scale_factor: float = 1.0) -> List[DisturbancePoint]:
    """Re-replay every campaign with pctr scaled by (1 + d) and score the
    raw replay and, when given, the calibrated forecasts against the fixed
    truths."""
    points: List[DisturbancePoint] = []
    for d in disturbances:
        disturbed = index.with_pctr_scale(1.0 + d)
        new_rows = [DatasetRow(r.campaign_id, r.criteria,
                               replay(r.criteria, disturbed, scale_factor),
                               r.truth)
                    for r in eval_rows]
        methods: Dict[str, Optional[Forecaster]] = {REPLAY_METHOD: None}
        if model is not None:
            methods["MTL_N"] = model_forecaster(model)
        report = benchmark(new_rows, methods)
        for c in report.cells:
            points.append(DisturbancePoint(d=d, method=c.method,
                                           group=c.group,
                                           indicator=c.indicator,
                                           mape=c.mape, ratio=c.ratio))
    return points


def write_disturbance_csv(points: Sequence[DisturbancePoint], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["d", "method", "option", "indicator",
                         "mape", "ratio_05"])
        for p in points:
            writer.writerow([_fmt(p.d), p.method, p.group, p.indicator,
                             _fmt(p.mape), _fmt(p.ratio)])
