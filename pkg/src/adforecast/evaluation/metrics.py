"""Forecast accuracy metrics.

ape_i = |forecast_i - truth_i| / |truth_i|, defined only where truth is
nonzero; zero-truth campaigns are excluded and counted. The headline metric
weights each campaign's ape by its true spend, so large campaigns dominate,
and ratio_p reports the fraction of campaigns with ape strictly below p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UndefinedMetricError


@dataclass
class MetricValue:
    value: float
    n_used: int
    n_excluded: int


def ape(truths: np.ndarray, forecasts: np.ndarray) -> np.ndarray:
    """Absolute percentage errors over nonzero-truth entries, plus the mask
    of entries used."""
    truths = np.asarray(truths, dtype=np.float64)
    forecasts = np.asarray(forecasts, dtype=np.float64)
    mask = truths != 0
    return np.abs(forecasts[mask] - truths[mask]) / np.abs(truths[mask]), mask


def weighted_mape(truths, forecasts, cost_weights) -> MetricValue:
    """Cost-weighted mean absolute percentage error.

    Raises UndefinedMetricError when every truth is zero. Zero total weight
    falls back to the unweighted mean over the usable rows.
    """
    errors, mask = ape(truths, forecasts)
    n_excluded = int((~mask).sum())
    if errors.size == 0:
        raise UndefinedMetricError("all truths are zero; mape undefined")
    w = np.asarray(cost_weights, dtype=np.float64)[mask]
    total = w.sum()
    if total <= 0:
        return MetricValue(float(errors.mean()), int(mask.sum()), n_excluded)
    return MetricValue(float((w * errors).sum() / total), int(mask.sum()),
                       n_excluded)


def ratio_p(truths, forecasts, p: float = 0.5) -> MetricValue:
    """Fraction of usable campaigns with ape strictly below p."""
    errors, mask = ape(truths, forecasts)
    n_excluded = int((~mask).sum())
    if errors.size == 0:
        raise UndefinedMetricError("all truths are zero; ratio_p undefined")
    return MetricValue(float((errors < p).mean()), int(mask.sum()), n_excluded)


def pearson_matrix(labels: np.ndarray) -> np.ndarray:
    """Pearson correlations between label columns, shape (k, k)."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim != 2 or labels.shape[0] < 2:
        raise UndefinedMetricError("need at least two label rows")
    stds = labels.std(axis=0)
    if np.any(stds == 0):
        raise UndefinedMetricError("a label column is constant")
    return np.corrcoef(labels, rowvar=False)
