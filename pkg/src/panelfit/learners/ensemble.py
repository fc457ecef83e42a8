"""Bagged forests and stagewise gradient boosting over regression trees.

Forest randomness is fully pinned: tree i draws its bootstrap and its
per-node feature subsets from a generator seeded with mix64(seed, i), so
the fitted ensemble is identical however many worker processes ran the
trees. The PANEL_THREADS environment variable caps workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..metrics import rmse
from ..seeds import mix64
from .base import DesignMatrix, check_features
from .tree import TreeNode, _grow, tree_apply


def resolve_workers(workers: int | None = None) -> int:
    """Requested worker count, capped by PANEL_THREADS and never below 1."""
    cap = os.environ.get("PANEL_THREADS")
    if workers is None:
        workers = os.cpu_count() or 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, int(workers))


@dataclass
class FittedForest:
    """Average of bootstrap-grown trees, with out-of-bag validation RMSE."""

    trees: list[TreeNode]
    feature_names: list[str]
    b: int
    m_try: int
    n_min: int
    seed: int
    oob_error: float | None
    max_depth: int | None = None
    kind: str = "forest"

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, features) -> np.ndarray:
        x = check_features(self, features)
        acc = np.zeros(x.shape[0])
        for root in self.trees:
            acc += tree_apply(root, x)
        return acc / len(self.trees)


def _fit_trees(args):
    features, response, jobs, n_min, m_try, max_depth = args
    n = features.shape[0]
    rows = np.arange(n, dtype=np.intp)
    out = []
    for index, tree_seed in jobs:
        rng = np.random.default_rng(tree_seed)
        boot = rng.integers(0, n, size=n)
        root = _grow(features[boot], response[boot], rows, n_min, m_try, rng,
                     max_depth)
        mask = np.ones(n, dtype=bool)
        mask[boot] = False
        oob = np.flatnonzero(mask)
        preds = tree_apply(root, features[oob]) if oob.size else np.empty(0)
        out.append((index, root, oob, preds))
    return out


def fit_forest(
    d: DesignMatrix,
    b: int = 500,
    m_try: int | None = None,
    n_min: int = 5,
    seed: int = 0,
    max_depth: int | None = None,
    workers: int | None = None,
) -> FittedForest:
    """Fit a forest of ``b`` trees on bootstrap resamples.

    Each tree trains on n rows drawn with replacement; the rows it never
    saw act as its validation set, and their pooled predictions give the
    out-of-bag RMSE. Per-node feature subsampling defaults to
    ``floor(m / 3)`` (at least 1).
    """
    if b < 1:
        raise ValueError("b must be positive")
    m = d.n_features
    if m_try is None:
        m_try = max(1, m // 3)
    if not 1 <= m_try <= m:
        raise ValueError(f"m_try must be in 1..{m}")
    if n_min < 1:
        raise ValueError("n_min must be positive")

    jobs = [(i, mix64(seed, i)) for i in range(b)]
    w = resolve_workers(workers)
    if w == 1 or b < 2 * w:
        batches = [_fit_trees((d.features, d.response, jobs, n_min, m_try,
                               max_depth))]
    else:
        size = -(-b // w)
        chunks = [jobs[i:i + size] for i in range(0, b, size)]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            batches = list(pool.map(
                _fit_trees,
                [(d.features, d.response, c, n_min, m_try, max_depth)
                 for c in chunks],
            ))

    trees: list[TreeNode | None] = [None] * b
    oob_sum = np.zeros(d.n_rows)
    oob_count = np.zeros(d.n_rows, dtype=np.int64)
    for batch in batches:
        for index, root, oob, preds in batch:
            trees[index] = root
            if oob.size:
                oob_sum[oob] += preds
                oob_count[oob] += 1
    covered = oob_count > 0
    oob_error = None
    if covered.any():
        oob_error = rmse(d.response[covered],
                         oob_sum[covered] / oob_count[covered])
    return FittedForest(trees=trees, feature_names=list(d.feature_names),
                        b=b, m_try=m_try, n_min=n_min, seed=seed,
                        oob_error=oob_error, max_depth=max_depth)


@dataclass
class FittedGBM:
    """Stagewise sum of shrunken depth-limited trees."""

    init: float
    shrinkage: float
    trees: list[TreeNode]
    feature_names: list[str]
    depth: int
    n_min: int
    kind: str = "gbm"

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, features) -> np.ndarray:
        x = check_features(self, features)
        acc = np.full(x.shape[0], self.init)
        for root in self.trees:
            acc += self.shrinkage * tree_apply(root, x)
        return acc


def fit_gbm(
    d: DesignMatrix,
    n_trees: int = 500,
    depth: int = 3,
    shrinkage: float = 0.1,
    n_min: int = 1,
) -> FittedGBM:
    """Least-squares gradient boosting.

    Starts from the response mean; every stage fits a depth-limited tree
    to the current residuals (all features considered at every node, so
    the fit is deterministic) and adds ``shrinkage`` times its prediction.
    """
    if n_trees < 1:
        raise ValueError("n_trees must be positive")
    if depth < 1:
        raise ValueError("depth must be positive")
    if not 0 < shrinkage <= 1:
        raise ValueError("shrinkage must be in (0, 1]")
    if n_min < 1:
        raise ValueError("n_min must be positive")

    rows = np.arange(d.n_rows, dtype=np.intp)
    init = float(d.response.mean())
    resid = d.response - init
    trees: list[TreeNode] = []
    for _ in range(n_trees):
        root = _grow(d.features, resid, rows, n_min, d.n_features, None, depth)
        resid = resid - shrinkage * tree_apply(root, d.features)
        trees.append(root)
    return FittedGBM(init=init, shrinkage=shrinkage, trees=trees,
                     feature_names=list(d.feature_names), depth=depth,
                     n_min=n_min)
