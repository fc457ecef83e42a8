"""Regression trees grown by exhaustive variance-reduction splits.

The split search is vectorized across all candidate features of a node:
one stable argsort, prefix sums of the (centered) responses, and the
summed children SSE evaluated at every cut position in one shot.
Thresholds sit at midpoints between consecutive distinct values; ties in
SSE break toward the lower feature index, then the lower threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import DesignMatrix, check_features


@dataclass
class TreeNode:
    """One node; a leaf when ``feature_index`` is None."""

    feature_index: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    prediction: float | None = None
    n_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None


def _best_split(x: np.ndarray, y: np.ndarray, n_min: int):
    """Best (column position, threshold) over a node's candidate block.

    ``x`` is the node's rows restricted to candidate features, ``y`` the
    centered responses. Returns None when no cut keeps both children at
    n_min rows or fails to reduce SSE.
    """
    n = y.size
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ys = y[order]
    c1 = np.cumsum(ys, axis=0)
    c2 = np.cumsum(ys * ys, axis=0)
    k = np.arange(1, n, dtype=float)[:, None]
    left = c2[:-1] - c1[:-1] ** 2 / k
    right = (c2[-1] - c2[:-1]) - (c1[-1] - c1[:-1]) ** 2 / (n - k)
    total = left + right
    ok = xs[:-1] != xs[1:]
    if n_min > 1:
        sizes = np.arange(1, n)[:, None]
        ok &= (sizes >= n_min) & (n - sizes >= n_min)
    total = np.where(ok, total, np.inf)

    best_per_col = total.min(axis=0)
    col = int(np.argmin(best_per_col))
    best = float(best_per_col[col])
    parent = float(y @ y)  # y is centered
    # strict improvement, with a guard against prefix-sum float dust
    if not best < parent - 1e-12 * max(1.0, parent):
        return None
    cut = int(np.argmin(total[:, col]))
    lo, hi = float(xs[cut, col]), float(xs[cut + 1, col])
    thr = (lo + hi) / 2.0
    if thr >= hi:  # adjacent floats: midpoint rounded up to hi
        thr = lo
    return col, thr


def _grow(features, response, idx, n_min, m_try, rng, max_depth, depth=0):
    y = response[idx]
    n = idx.size
    if (
        n < 2 * n_min
        or (max_depth is not None and depth >= max_depth)
        or y.max() == y.min()
    ):
        return TreeNode(prediction=float(y.mean()), n_samples=n)

    m = features.shape[1]
    if rng is None or m_try >= m:
        cand = np.arange(m)
        block = features[idx]
    else:
        cand = np.sort(rng.choice(m, size=m_try, replace=False))
        block = features[np.ix_(idx, cand)]

    split = _best_split(block, y - y.mean(), n_min)
    if split is None:
        return TreeNode(prediction=float(y.mean()), n_samples=n)
    col, thr = split
    feat = int(cand[col])
    go_left = block[:, col] <= thr
    left = _grow(features, response, idx[go_left], n_min, m_try, rng,
                 max_depth, depth + 1)
    right = _grow(features, response, idx[~go_left], n_min, m_try, rng,
                  max_depth, depth + 1)
    return TreeNode(feature_index=feat, threshold=thr, left=left, right=right,
                    n_samples=n)


def tree_apply(root: TreeNode, x: np.ndarray) -> np.ndarray:
    """Route every row of ``x`` to its leaf prediction."""
    out = np.empty(x.shape[0])
    stack = [(root, np.arange(x.shape[0], dtype=np.intp))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.feature_index is None:
            out[rows] = node.prediction
        else:
            go = x[rows, node.feature_index] <= node.threshold
            stack.append((node.left, rows[go]))
            stack.append((node.right, rows[~go]))
    return out


def count_nodes(root: TreeNode) -> tuple[int, int]:
    """(internal, leaf) node counts."""
    internal = leaves = 0
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            leaves += 1
        else:
            internal += 1
            stack.extend((node.left, node.right))
    return internal, leaves


@dataclass
class FittedTree:
    """A single grown regression tree."""

    root: TreeNode
    feature_names: list[str]
    n_min: int
    m_try: int
    seed: int
    kind: str = "tree"

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, features) -> np.ndarray:
        x = check_features(self, features)
        return tree_apply(self.root, x)


def fit_tree(
    d: DesignMatrix,
    n_min: int = 5,
    m_try: int | None = None,
    seed: int = 0,
    max_depth: int | None = None,
) -> FittedTree:
    """Grow one regression tree.

    At every node, ``m_try`` candidate features are drawn without
    replacement (all features when m_try is None or >= m), the best
    SSE-reducing midpoint cut is taken, and growth stops when a node has
    fewer than ``2 * n_min`` rows or no cut reduces SSE. Leaves predict
    the node mean and never hold fewer than ``n_min`` rows.
    """
    m = d.n_features
    if m_try is None:
        m_try = m
    if not 1 <= m_try <= m:
        raise ValueError(f"m_try must be in 1..{m}")
    if n_min < 1:
        raise ValueError("n_min must be positive")
    rng = np.random.default_rng(seed) if m_try < m else None
    root = _grow(d.features, d.response, np.arange(d.n_rows, dtype=np.intp),
                 n_min, m_try, rng, max_depth)
    return FittedTree(root=root, feature_names=list(d.feature_names),
                      n_min=n_min, m_try=m_try, seed=seed)
