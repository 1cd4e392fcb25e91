"""Greedy CART regression trees.

Each node exhaustively scores (feature, threshold) candidates -- thresholds
are midpoints between sorted distinct values -- by the summed SSE of the
two children, optionally over a random feature subset. Ties break toward
the lowest feature index, then the lowest threshold. Recursion stops at
max_depth, when a child would drop below min_leaf, or when the node SSE is
already zero; leaves predict their mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import split_scan

ZERO_SSE = 1e-12


@dataclass
class TreeNode:
    prediction: float = 0.0
    feature_index: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def fit_tree(X: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int = 1,
             feature_subset: Optional[int] = None,
             rng: Optional[np.random.Generator] = None) -> TreeNode:
    """Grow one regression tree. feature_subset draws that many candidate
    features per split (requires rng)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a nonempty 2-D array")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if feature_subset is not None and rng is None:
        raise ValueError("feature_subset requires an rng")
    return _grow(X, y, np.arange(X.shape[0]), 0, max_depth, min_leaf, feature_subset, rng)


def _grow(X, y, idx, depth, max_depth, min_leaf, feature_subset, rng):
    y_node = y[idx]
    mean = float(y_node.mean())
    node = TreeNode(prediction=mean)
    sse = float(((y_node - mean) ** 2).sum())
    if depth >= max_depth or idx.shape[0] < 2 * min_leaf or sse <= ZERO_SSE:
        return node

    n_features = X.shape[1]
    if feature_subset is not None and feature_subset < n_features:
        candidates = np.sort(rng.choice(n_features, size=feature_subset, replace=False))
    else:
        candidates = np.arange(n_features)

    best_cost = np.inf
    best_feature = -1
    best_thr = 0.0
    for j in candidates:
        col = X[idx, j]
        order = np.argsort(col, kind="stable")
        cost, thr, found = split_scan(
            np.ascontiguousarray(col[order]),
            np.ascontiguousarray(y_node[order]),
            min_leaf)
        if found and cost < best_cost:
            best_cost = cost
            best_feature = int(j)
            best_thr = float(thr)
    if best_feature < 0:
        return node

    mask = X[idx, best_feature] <= best_thr
    node.feature_index = best_feature
    node.threshold = best_thr
    node.left = _grow(X, y, idx[mask], depth + 1, max_depth, min_leaf, feature_subset, rng)
    node.right = _grow(X, y, idx[~mask], depth + 1, max_depth, min_leaf, feature_subset, rng)
    return node


def predict_tree(node: TreeNode, x: np.ndarray) -> float:
    while not node.is_leaf:
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.prediction


def predict_tree_batch(node: TreeNode, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.array([predict_tree(node, row) for row in X])


def tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"p": node.prediction}
    return {
        "f": node.feature_index,
        "t": node.threshold,
        "l": tree_to_dict(node.left),
        "r": tree_to_dict(node.right),
    }


def tree_from_dict(d: dict) -> TreeNode:
    if "p" in d:
        return TreeNode(prediction=float(d["p"]))
    return TreeNode(
        feature_index=int(d["f"]), threshold=float(d["t"]),
        left=tree_from_dict(d["l"]), right=tree_from_dict(d["r"]))
