"""Random forest of Gini decision trees.

Trees are stored as flat arrays (feature, threshold, left, right, counts) so
prediction is a vectorized walk rather than a recursion per sample.
"""

from __future__ import annotations

import math

import numpy as np

LEAF = -1


def _best_split(x: np.ndarray, pos: np.ndarray):
    """Best Gini split on one feature; thresholds are midpoints of sorted unique values.

    Returns (weighted_impurity, threshold) or None when ``x`` is constant.
    """
    found = _best_splits(x[:, None], pos)
    if found is None:
        return None
    impurity, thr, _ = found
    return impurity, thr


def _best_splits(Xs: np.ndarray, pos: np.ndarray):
    """Best Gini split over the columns of ``Xs`` at once.

    Returns (weighted_impurity, threshold, column) for the best column, the
    first one on ties, or None when every column is constant.
    """
    n, m = Xs.shape
    order = Xs.argsort(axis=0, kind="stable")
    cols = np.arange(m)
    xs = Xs[order, cols]
    valid = xs[1:] != xs[:-1]  # a split after row i is allowed
    if not valid.any():
        return None
    cum_pos = pos[order].cumsum(axis=0)[:-1]
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    right_pos = pos.sum() - cum_pos
    # n * 2p(1-p) summed over both sides
    impurity = 2 * (cum_pos - cum_pos * cum_pos / n_left) + 2 * (right_pos - right_pos * right_pos / n_right)
    impurity[~valid] = np.inf
    best_rows = np.argmin(impurity, axis=0)
    best = impurity[best_rows, cols]
    col = int(np.argmin(best))
    i = best_rows[col]
    return best[col] / n, 0.5 * (xs[i, col] + xs[i + 1, col]), col


class _TreeBuilder:
    def __init__(self, max_depth: int, n_sub: int, gen: np.random.Generator):
        self.max_depth = max_depth
        self.n_sub = n_sub
        self.gen = gen
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[tuple[int, int]] = []

    def _node(self, pos: np.ndarray) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        n_pos = int(pos.sum())
        self.counts.append((len(pos) - n_pos, n_pos))
        return len(self.feature) - 1

    def build(self, X: np.ndarray, pos: np.ndarray, depth: int = 0) -> int:
        node = self._node(pos)
        n_pos = pos.sum()
        if depth >= self.max_depth or n_pos == 0 or n_pos == len(pos):
            return node
        p = n_pos / len(pos)
        parent = 2 * p * (1 - p)
        feats = self.gen.choice(X.shape[1], size=self.n_sub, replace=False)
        found = _best_splits(X[:, feats], pos)
        if found is None or found[0] >= parent - 1e-12:
            return node
        _, thr, col = found
        f = int(feats[col])
        go_left = X[:, f] <= thr
        self.feature[node] = f
        self.threshold[node] = float(thr)
        self.left[node] = self.build(X[go_left], pos[go_left], depth + 1)
        self.right[node] = self.build(X[~go_left], pos[~go_left], depth + 1)
        return node

    def arrays(self) -> dict:
        return {
            "feature": np.array(self.feature, dtype=np.int64),
            "threshold": np.array(self.threshold, dtype=float),
            "left": np.array(self.left, dtype=np.int64),
            "right": np.array(self.right, dtype=np.int64),
            "counts": np.array(self.counts, dtype=np.int64).reshape(-1, 2),
        }


def fit(X: np.ndarray, y: np.ndarray, n_trees: int, max_depth: int,
        n_sub: int | None, bootstrap: bool, gen: np.random.Generator) -> dict:
    n, d = X.shape
    n_sub = min(d, n_sub or math.ceil(math.sqrt(d)))
    pos = (y == 1).astype(np.int64)
    trees = []
    for _ in range(n_trees):
        idx = gen.integers(0, n, size=n) if bootstrap else np.arange(n)
        builder = _TreeBuilder(max_depth, n_sub, gen)
        builder.build(X[idx], pos[idx])
        trees.append(builder.arrays())
    return {"trees": trees}


def tree_leaf(tree: dict, X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int64)
    feature, thr = tree["feature"], tree["threshold"]
    active = feature[node] != LEAF
    while active.any():
        idx = np.flatnonzero(active)
        cur = node[idx]
        go_left = X[idx, feature[cur]] <= thr[cur]
        node[idx] = np.where(go_left, tree["left"][cur], tree["right"][cur])
        active[idx] = feature[node[idx]] != LEAF
    return node


def tree_vote(tree: dict, X: np.ndarray) -> np.ndarray:
    """+1/-1 majority class of the reached leaf; ties go to +1."""
    counts = tree["counts"][tree_leaf(tree, X)]
    return np.where(counts[:, 1] >= counts[:, 0], 1, -1)


def scores(params: dict, X: np.ndarray) -> np.ndarray:
    """2 * (fraction of trees voting +1) - 1."""
    votes = np.zeros(len(X))
    for tree in params["trees"]:
        votes += tree_vote(tree, X) == 1
    return 2 * votes / len(params["trees"]) - 1
