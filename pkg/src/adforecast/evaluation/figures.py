"""Report figures rendered next to the delimited output."""

from __future__ import annotations

from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .benchmark import (DisturbancePoint, EvalReport, GROUPS, INDICATORS)


def render_benchmark_figure(report: EvalReport, path: str) -> None:
    """Grouped bars of cost-weighted mape per method and indicator, one
    panel per bidding group."""
    methods = []
    for c in report.cells:
        if c.method not in methods:
            methods.append(c.method)
    fig, axes = plt.subplots(1, len(GROUPS), figsize=(11, 4), sharey=False)
    for ax, group in zip(np.atleast_1d(axes), GROUPS):
        width = 0.8 / max(len(methods), 1)
        xs = np.arange(len(INDICATORS))
        for mi, method in enumerate(methods):
            values = []
            for ind in INDICATORS:
                try:
                    cell = report.cell(method, group, ind)
                    values.append(np.nan if cell.mape is None else cell.mape)
                except KeyError:
                    values.append(np.nan)
            ax.bar(xs + mi * width, values, width=width, label=method)
        ax.set_xticks(xs + width * (len(methods) - 1) / 2)
        ax.set_xticklabels(INDICATORS)
        ax.set_title(f"{group} bidding")
        ax.set_ylabel("cost-weighted mape")
    handles, labels = np.atleast_1d(axes)[0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_disturbance_figure(points: Sequence[DisturbancePoint],
                              path: str) -> None:
    """mape against the pctr disturbance, per indicator and method, one
    panel per bidding group."""
    methods = []
    for p in points:
        if p.method not in methods:
            methods.append(p.method)
    fig, axes = plt.subplots(1, len(GROUPS), figsize=(11, 4))
    for ax, group in zip(np.atleast_1d(axes), GROUPS):
        for method in methods:
            for ind in INDICATORS:
                series = sorted(
                    (p.d, p.mape) for p in points
                    if p.method == method and p.group == group
                    and p.indicator == ind and p.mape is not None)
                if not series:
                    continue
                ds = [s[0] for s in series]
                ms = [s[1] for s in series]
                ax.plot(ds, ms, marker="o", markersize=3,
                        label=f"{method} {ind}")
        ax.set_xlabel("pctr disturbance d")
        ax.set_ylabel("cost-weighted mape")
        ax.set_title(f"{group} bidding")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
