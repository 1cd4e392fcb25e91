"""Random forest regressor for the water temperature / pH setpoint task.

Each tree fits a bootstrap resample (n draws with replacement) and
considers ceil(sqrt(n_features)) random features per split. The ensemble
prediction is the equal-weight mean of the tree predictions, once per
target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..preprocess import Dataset, FeatureFrame, frame_vector
from .tree import TreeNode, fit_tree, predict_tree

SETPOINT_TARGETS = ("temp_setpoint_c", "ph_setpoint")


class SchemaError(ValueError):
    """Model and frame feature schemas disagree."""


@dataclass
class ForestModel:
    trees: dict[str, list[TreeNode]]     # target name -> tree roots
    n_features_per_split: int
    feature_names: list[str]
    targets: tuple[str, ...] = SETPOINT_TARGETS
    max_depth: int = 6
    min_leaf: int = 2


def fit_forest_arrays(X: np.ndarray, y: np.ndarray, n_trees: int, max_depth: int,
                      min_leaf: int, rng: np.random.Generator,
                      bootstrap: bool = True) -> list[TreeNode]:
    """Fit one single-target forest on plain arrays."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, n_features = X.shape
    subset = math.ceil(math.sqrt(n_features))
    trees = []
    for _ in range(n_trees):
        if bootstrap:
            idx = rng.integers(0, n, size=n)
            Xb, yb = X[idx], y[idx]
        else:
            Xb, yb = X, y
        trees.append(fit_tree(Xb, yb, max_depth, min_leaf, feature_subset=subset, rng=rng))
    return trees


def forest_predict(trees: list[TreeNode], x: np.ndarray) -> float:
    return float(np.mean([predict_tree(t, x) for t in trees]))


def fit_random_forest(ds: Dataset, n_trees: int, max_depth: int, min_leaf: int,
                      rng: np.random.Generator, feature_names: list[str],
                      targets: tuple[str, ...] = SETPOINT_TARGETS) -> ForestModel:
    """Fit one forest per setpoint target on the train split."""
    train_idx = ds.indices("train")
    if not train_idx:
        raise ValueError("train split is empty")
    X = np.array([frame_vector(ds.frames[i], feature_names) for i in train_idx])
    forests = {}
    for target in targets:
        y = np.array([ds.targets[target][i] for i in train_idx], dtype=np.float64)
        forests[target] = fit_forest_arrays(X, y, n_trees, max_depth, min_leaf, rng)
    return ForestModel(
        trees=forests,
        n_features_per_split=math.ceil(math.sqrt(len(feature_names))),
        feature_names=list(feature_names),
        targets=tuple(targets),
        max_depth=max_depth,
        min_leaf=min_leaf)


def predict_setpoints(model: ForestModel, frame: FeatureFrame) -> dict[str, float]:
    try:
        x = frame_vector(frame, model.feature_names)
    except Exception as exc:
        raise SchemaError(str(exc)) from exc
    return {target: forest_predict(trees, x) for target, trees in model.trees.items()}
