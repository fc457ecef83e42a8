"""Model interpretation: importance rankings, partial dependence, residual
diagnostics.

Partial dependence marginalizes a fitted model over the observed rows:
for each grid value g of the chosen feature, every row has that feature
overwritten with g, the model predicts, and the predictions are
averaged. For forests, the spread of the per-tree curves gives a
pointwise band.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .learners.base import DesignMatrix
from .learners.ensemble import FittedForest
from .learners.tree import count_nodes, tree_apply
from .metrics import normal_quantile, pearson

PDP_BAND_PERCENTILES = (2.5, 97.5)
RUG_MAX_POINTS = 200


@dataclass(frozen=True)
class ImportanceEntry:
    name: str
    splits: int
    proportion: float


@dataclass(frozen=True)
class ImportanceRanking:
    """Per-feature split shares, descending (ties broken by name)."""

    entries: tuple[ImportanceEntry, ...]
    total_splits: int

    def names(self) -> list[str]:
        return [e.name for e in self.entries]


def variable_importance(forest: FittedForest) -> ImportanceRanking:
    """Rank features by their share of the forest's internal splits.

    Every feature appears in the ranking, split count zero included.
    Raises ValueError on an all-leaf forest ("no splits to rank").
    """
    counts = {name: 0 for name in forest.feature_names}
    total = 0
    for root in forest.trees:
        stack = [root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                continue
            counts[forest.feature_names[node.feature_index]] += 1
            total += 1
            stack.extend((node.left, node.right))
    if total == 0:
        raise ValueError("no splits to rank")
    entries = [
        ImportanceEntry(name=name, splits=n, proportion=n / total)
        for name, n in counts.items()
    ]
    entries.sort(key=lambda e: (-e.proportion, e.name))
    return ImportanceRanking(entries=tuple(entries), total_splits=total)


def top_k(ranking: ImportanceRanking, k: int = 15) -> ImportanceRanking:
    """The first ``k`` entries of a ranking (all of it when shorter)."""
    if k < 1:
        raise ValueError("k must be positive")
    return ImportanceRanking(entries=ranking.entries[:k],
                             total_splits=ranking.total_splits)


@dataclass
class PDPCurve:
    """Marginal effect of one feature, with an optional ensemble band."""

    feature: str
    grid: np.ndarray
    mean_effect: np.ndarray
    band_low: np.ndarray | None
    band_high: np.ndarray | None
    rug: np.ndarray


def partial_dependence(model, d: DesignMatrix, feature,
                       grid_size: int = 51) -> PDPCurve:
    """Partial dependence of ``model`` on one feature.

    Parameters
    ----------
    model : fitted model
        Anything with ``predict``; forests additionally get a band from
        the 2.5/97.5 percentiles of per-tree curves.
    d : DesignMatrix
        Background rows to marginalize over.
    feature : str or int
        Feature name or column index.
    grid_size : int
        Grid points, placed at evenly spaced quantiles of the observed
        values (so the endpoints are the observed min and max); duplicate
        quantiles collapse.

    Returns
    -------
    PDPCurve
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if isinstance(feature, str):
        try:
            col = d.feature_names.index(feature)
        except ValueError:
            raise ValueError(f"unknown feature {feature!r}") from None
    else:
        col = int(feature)
        if not 0 <= col < d.n_features:
            raise ValueError(f"feature index {col} out of range")
    values = d.features[:, col]
    if np.unique(values).size < 2:
        raise ValueError(f"feature {d.feature_names[col]!r} is constant")

    grid = np.unique(np.percentile(values, np.linspace(0.0, 100.0, grid_size)))
    n = d.n_rows
    g = grid.size
    stacked = np.tile(d.features, (g, 1))
    stacked[:, col] = np.repeat(grid, n)

    mean_effect = model.predict(stacked).reshape(g, n).mean(axis=1)

    band_low = band_high = None
    if isinstance(model, FittedForest):
        curves = np.empty((len(model.trees), g))
        for i, root in enumerate(model.trees):
            curves[i] = tree_apply(root, stacked).reshape(g, n).mean(axis=1)
        band_low, band_high = np.percentile(curves, PDP_BAND_PERCENTILES, axis=0)

    srt = np.sort(values)
    take = np.unique(np.linspace(0, n - 1, min(n, RUG_MAX_POINTS)).round()
                     .astype(int))
    return PDPCurve(feature=d.feature_names[col], grid=grid,
                    mean_effect=mean_effect, band_low=band_low,
                    band_high=band_high, rug=srt[take])


@dataclass
class QQResult:
    """Standardized residual order statistics against normal quantiles."""

    theoretical: np.ndarray
    observed: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray


def qq_residuals(y, yhat) -> QQResult:
    """Normal Q-Q data for the residuals ``y - yhat``.

    Residuals are standardized to mean 0, sd 1; plotting positions are
    (i - 0.5) / n. The band is the theoretical line plus or minus
    1.96 * sqrt(p(1-p)/n) / pdf(quantile), the asymptotic spread of a
    sample quantile around its true value.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError("y and yhat must be 1-D and equal length")
    resid = y - yhat
    sd = resid.std()
    if sd == 0:
        raise ValueError("zero residual variance")
    std_resid = np.sort((resid - resid.mean()) / sd)
    n = resid.size
    p = (np.arange(1, n + 1) - 0.5) / n
    theo = np.array([normal_quantile(v) for v in p])
    dens = np.exp(-theo ** 2 / 2.0) / math.sqrt(2.0 * math.pi)
    half = 1.96 * np.sqrt(p * (1.0 - p) / n) / dens
    return QQResult(theoretical=theo, observed=std_resid,
                    band_low=theo - half, band_high=theo + half)


def actual_vs_fitted(y, yhat) -> tuple[float, np.ndarray]:
    """Pearson correlation plus the paired (actual, fitted) table."""
    rho = pearson(y, yhat)
    table = np.column_stack([np.asarray(y, float), np.asarray(yhat, float)])
    return rho, table


# -- delimited exports (6-decimal CSV convention) -------------------------

def _fmt(v: float) -> str:
    return f"{v:.6f}"


def importance_to_csv(ranking: ImportanceRanking) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "splits", "proportion"])
    for e in ranking.entries:
        w.writerow([e.name, e.splits, _fmt(e.proportion)])
    return buf.getvalue()


def pdp_to_csv(curve: PDPCurve) -> str:
    # Non-ensemble curves have no band; the lo/hi columns degenerate to
    # the mean so the file layout stays fixed.
    lo = curve.band_low if curve.band_low is not None else curve.mean_effect
    hi = curve.band_high if curve.band_high is not None else curve.mean_effect
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid", "mean", "lo", "hi"])
    for row in zip(curve.grid, curve.mean_effect, lo, hi):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def qq_to_csv(qq: QQResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theoretical", "observed", "lo", "hi"])
    for row in zip(qq.theoretical, qq.observed, qq.band_low, qq.band_high):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def actual_vs_fitted_to_csv(rho: float, table: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(f"# pearson,{_fmt(rho)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["actual", "fitted"])
    for a, f in table:
        w.writerow([_fmt(a), _fmt(f)])
    return buf.getvalue()
