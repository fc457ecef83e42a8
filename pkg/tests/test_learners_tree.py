"""Regression tree growth against an exhaustive split-search reference."""

import numpy as np
import pytest

from panelfit.learners import DesignMatrix, count_nodes, fit_tree, tree_apply
from panelfit.learners.tree import _best_split


def sse(v):
    return float(((v - v.mean()) ** 2).sum()) if len(v) else 0.0


def brute_force_split(x, y, n_min):
    """Try every feature and every midpoint; ties -> lowest feature, lowest
    threshold. Returns (feature, threshold, total_children_sse) or None."""
    n, m = x.shape
    parent = sse(y)
    best = None
    for j in range(m):
        vals = np.unique(x[:, j])
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2.0
            if thr >= hi:        # adjacent floats: fall back to the left value
                thr = lo
            mask = x[:, j] <= thr
            nl = int(mask.sum())
            if nl < n_min or n - nl < n_min:
                continue
            score = sse(y[mask]) + sse(y[~mask])
            if score >= parent - 1e-12 * max(1.0, parent):
                continue
            if best is None or score < best[2] - 1e-12:
                best = (j, thr, score)
            elif abs(score - best[2]) <= 1e-12:
                if (j, thr) < (best[0], best[1]):
                    best = (j, thr, score)
    return best


@pytest.mark.parametrize("seed", range(8))
def test_best_split_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 60))
    m = int(rng.integers(1, 5))
    x = np.round(rng.normal(size=(n, m)), 2)     # ties likely
    y = rng.normal(size=n)
    n_min = int(rng.integers(1, 4))
    got = _best_split(x, y - y.mean(), n_min)
    want = brute_force_split(x, y, n_min)
    if want is None:
        assert got is None
    else:
        gj, gthr = got
        wj, wthr, wscore = want
        assert (gj, gthr) == (wj, wthr)
        # and the achieved SSE matches
        mask = x[:, gj] <= gthr
        assert sse(y[mask]) + sse(y[~mask]) == pytest.approx(wscore, abs=1e-9)


def test_tree_reproduces_step_function_exactly():
    x = np.linspace(0, 1, 40).reshape(-1, 1)
    y = np.where(x[:, 0] > 0.5, 3.0, -1.0)
    d = DesignMatrix(x, ["t"], y)
    model = fit_tree(d, n_min=1)
    pred = model.predict(x)
    np.testing.assert_array_equal(pred, y)
    internal, leaves = count_nodes(model.root)
    assert internal == 1 and leaves == 2
    assert model.root.feature_index == 0
    # midpoint of the two central grid values
    lo, hi = x[19, 0], x[20, 0]
    assert model.root.threshold == pytest.approx((lo + hi) / 2, abs=1e-12)


def test_leaves_respect_n_min_and_predict_leaf_means():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(200, 3))
    y = x[:, 0] * 2 + rng.normal(size=200) * 0.3
    d = DesignMatrix(x, ["a", "b", "c"], y)
    n_min = 7
    model = fit_tree(d, n_min=n_min)

    # walk every row down the tree by hand and group rows by leaf
    leaf_rows = {}
    for i in range(200):
        node = model.root
        while not node.is_leaf:
            node = node.left if x[i, node.feature_index] <= node.threshold else node.right
        leaf_rows.setdefault(id(node), []).append(i)
        assert node.n_samples >= n_min

    pred = model.predict(x)
    for node_id, rows in leaf_rows.items():
        np.testing.assert_allclose(pred[rows], y[rows].mean(), atol=1e-12)


def test_constant_response_gives_single_leaf():
    x = np.arange(20.0).reshape(-1, 1)
    d = DesignMatrix(x, ["t"], np.full(20, 4.25))
    model = fit_tree(d, n_min=2)
    assert model.root.is_leaf
    assert model.root.prediction == 4.25


def test_max_depth_caps_growth():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(300, 4))
    y = rng.normal(size=300)
    d = DesignMatrix(x, list("abcd"), y)
    shallow = fit_tree(d, n_min=1, max_depth=2)

    def depth(node):
        if node.is_leaf:
            return 0
        return 1 + max(depth(node.left), depth(node.right))

    assert depth(shallow.root) <= 2
    deep = fit_tree(d, n_min=1)
    assert count_nodes(deep.root)[0] > count_nodes(shallow.root)[0]


def test_m_try_subsampling_is_seeded():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(150, 8))
    y = x @ rng.normal(size=8) + rng.normal(size=150) * 0.1
    d = DesignMatrix(x, [f"f{j}" for j in range(8)], y)
    a = fit_tree(d, n_min=5, m_try=3, seed=11)
    b = fit_tree(d, n_min=5, m_try=3, seed=11)
    c = fit_tree(d, n_min=5, m_try=3, seed=12)
    xs = rng.normal(size=(40, 8))
    np.testing.assert_array_equal(a.predict(xs), b.predict(xs))
    assert not np.array_equal(a.predict(xs), c.predict(xs))
    # full m_try equals the deterministic tree
    full = fit_tree(d, n_min=5, m_try=8, seed=99)
    det = fit_tree(d, n_min=5)
    np.testing.assert_array_equal(full.predict(xs), det.predict(xs))


def test_tree_apply_matches_recursive_descent():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(120, 5))
    y = np.sin(x[:, 0]) + x[:, 1] ** 2 + rng.normal(size=120) * 0.1
    d = DesignMatrix(x, [f"f{j}" for j in range(5)], y)
    model = fit_tree(d, n_min=3)

    def walk(node, row):
        while not node.is_leaf:
            node = node.left if row[node.feature_index] <= node.threshold else node.right
        return node.prediction

    xs = rng.normal(size=(60, 5))
    fast = tree_apply(model.root, xs)
    slow = np.array([walk(model.root, r) for r in xs])
    np.testing.assert_array_equal(fast, slow)


def test_fit_tree_validates_arguments():
    rng = np.random.default_rng(9)
    d = DesignMatrix(rng.normal(size=(30, 2)), ["a", "b"], rng.normal(size=30))
    with pytest.raises(ValueError):
        fit_tree(d, n_min=0)
    with pytest.raises(ValueError):
        fit_tree(d, m_try=0)
    with pytest.raises(ValueError):
        fit_tree(d, m_try=3)     # more than available features
