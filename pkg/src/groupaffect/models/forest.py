"""Random-forest regression: bagged variance-reduction trees.

Trees are grown by a numba kernel over preallocated node arrays, so a
200-tree forest on a few thousand rows fits in seconds on one core. Splits
maximize the usual sum-of-squares gain over `mtry` randomly sampled
features; leaves hold at least `min_leaf` rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from groupaffect.errors import ValidationError


@njit(cache=True)
def _grow(Xb, yb, mtry, min_leaf, seed):
    """Grow one tree on a bootstrap sample; returns flat node arrays."""
    n, d = Xb.shape
    max_nodes = 2 * n
    feat = np.full(max_nodes, -1, np.int64)
    thr = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes, np.float64)
    idx = np.arange(n)
    np.random.seed(seed)
    stack = [(0, 0, n)]
    n_nodes = 1
    while stack:
        node, lo, hi = stack.pop()
        m = hi - lo
        ys = yb[idx[lo:hi]]
        value[node] = ys.mean()
        if m < 2 * min_leaf:
            continue
        # sample mtry features without replacement (partial Fisher-Yates)
        perm = np.arange(d)
        for i in range(mtry):
            j = i + np.random.randint(d - i)
            perm[i], perm[j] = perm[j], perm[i]
        best_gain = 0.0
        best_f = -1
        best_t = 0.0
        total = ys.sum()
        base = total * total / m
        for fi in range(mtry):
            f = perm[fi]
            xs = Xb[idx[lo:hi], f]
            order = np.argsort(xs, kind="mergesort")
            xo = xs[order]
            yo = ys[order]
            csum = 0.0
            for i in range(m - 1):
                csum += yo[i]
                nl = i + 1
                if nl < min_leaf or m - nl < min_leaf:
                    continue
                if xo[i + 1] <= xo[i]:
                    continue
                gain = csum * csum / nl + (total - csum) ** 2 / (m - nl) - base
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_t = 0.5 * (xo[i] + xo[i + 1])
        if best_f < 0:
            continue
        seg = idx[lo:hi].copy()
        a = lo
        for i in range(m):
            if Xb[seg[i], best_f] <= best_t:
                idx[a] = seg[i]
                a += 1
        b = a
        for i in range(m):
            if Xb[seg[i], best_f] > best_t:
                idx[b] = seg[i]
                b += 1
        feat[node] = best_f
        thr[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack.append((n_nodes, lo, a))
        stack.append((n_nodes + 1, a, hi))
        n_nodes += 2
    return (feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes])


@njit(cache=True)
def _predict_tree(feat, thr, left, right, value, X):
    out = np.empty(len(X))
    for i in range(len(X)):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@dataclass
class ForestModel:
    kind: str
    trees: list[tuple]
    n_trees: int
    mtry: int
    min_leaf: int
    seed: int
    flags: list[str] = field(default_factory=list)

    def predict(self, Xte: np.ndarray) -> np.ndarray:
        Xte = np.ascontiguousarray(np.atleast_2d(np.asarray(Xte, dtype=float)))
        acc = np.zeros(len(Xte))
        for tree in self.trees:
            acc += _predict_tree(*tree, Xte)
        return acc / self.n_trees


def rf_fit(X: np.ndarray, y: np.ndarray, n_trees: int = 200,
           mtry: int | None = None, min_leaf: int = 5,
           seed: int = 0) -> ForestModel:
    """Bagged regression trees; deterministic given seed."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    y = np.ascontiguousarray(np.asarray(y, dtype=float))
    n, d = X.shape
    if n < min_leaf:
        raise ValidationError(f"need at least min_leaf={min_leaf} rows, got {n}")
    if mtry is None:
        mtry = math.ceil(d / 3)
    mtry = min(max(1, mtry), d)
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        rows = rng.integers(0, n, size=n)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        trees.append(_grow(X[rows], y[rows], mtry, min_leaf, tree_seed))
    return ForestModel("rf", trees, n_trees, mtry, min_leaf, seed)
