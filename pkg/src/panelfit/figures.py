"""Matplotlib rendering of report and interpretation artifacts.

Every function writes one PNG next to the delimited output it mirrors.
The Agg backend keeps this headless-safe.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 120


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def save_report_figure(report, path) -> None:
    """Horizontal bars of averaged RMSE per model, fit vs prediction."""
    rows = [r for r in report.results if not r.failed]
    names = [r.name for r in rows]
    pos = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(7, 0.5 * len(rows) + 1.8))
    ax.barh(pos + 0.2, [r.in_sample.rmse for r in rows], height=0.36,
            label="RMSE (fit)")
    ax.barh(pos - 0.2, [r.out_of_sample.rmse for r in rows], height=0.36,
            label="RMSE (prediction)")
    ax.set_yticks(pos, names)
    ax.invert_yaxis()
    ax.set_xlabel("RMSE")
    ax.legend()
    _save(fig, path)


def save_importance_figure(ranking, path) -> None:
    names = [e.name for e in ranking.entries]
    props = [e.proportion for e in ranking.entries]
    pos = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(6.5, 0.3 * len(names) + 1.5))
    ax.barh(pos, props)
    ax.set_yticks(pos, names)
    ax.invert_yaxis()
    ax.set_xlabel("share of splits")
    _save(fig, path)


def save_pdp_figure(curve, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    if curve.band_low is not None:
        ax.fill_between(curve.grid, curve.band_low, curve.band_high,
                        alpha=0.25, linewidth=0)
    ax.plot(curve.grid, curve.mean_effect)
    lo = ax.get_ylim()[0]
    ax.plot(curve.rug, np.full(curve.rug.size, lo), "|", color="0.3",
            markersize=8, clip_on=False)
    ax.set_xlabel(curve.feature)
    ax.set_ylabel("partial dependence")
    _save(fig, path)


def save_qq_figure(qq, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(qq.theoretical, qq.band_low, "--", color="0.5", linewidth=0.9)
    ax.plot(qq.theoretical, qq.band_high, "--", color="0.5", linewidth=0.9)
    ax.plot(qq.theoretical, qq.theoretical, color="0.35", linewidth=0.9)
    ax.plot(qq.theoretical, qq.observed, ".", markersize=4)
    ax.set_xlabel("theoretical quantile")
    ax.set_ylabel("standardized residual")
    _save(fig, path)


def save_actual_vs_fitted_figure(rho, table, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(table[:, 0], table[:, 1], ".", markersize=4, alpha=0.7)
    span = [table.min(), table.max()]
    ax.plot(span, span, color="0.35", linewidth=0.9)
    ax.set_xlabel("actual")
    ax.set_ylabel("fitted")
    ax.set_title(f"pearson rho = {rho:.3f}")
    _save(fig, path)
