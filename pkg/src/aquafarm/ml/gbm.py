"""Gradient-boosted trees for the feeding schedule task.

Squared-loss boosting: start from the training mean, then each stage fits
a depth-limited tree to the current residuals and is added with a
shrinkage factor. With leaves predicting residual means the training MSE
cannot increase from stage to stage, and the fit asserts exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..preprocess import Dataset, FeatureFrame, frame_vector
from .forest import SchemaError
from .tree import TreeNode, fit_tree, predict_tree, predict_tree_batch

FEED_TARGET = "feed_g_per_tick"
MSE_SLACK = 1e-9   # float tolerance on the non-increase assertion


@dataclass
class GbmModel:
    init_value: float
    stages: list[tuple[TreeNode, float]]   # (tree, learning_rate)
    feature_names: list[str]
    target: str = FEED_TARGET
    stage_mse: list[float] = None          # training MSE after each stage

    def predict(self, x: np.ndarray) -> float:
        out = self.init_value
        for tree, lr in self.stages:
            out += lr * predict_tree(tree, x)
        return float(out)


def fit_gbm_arrays(X: np.ndarray, y: np.ndarray, n_stages: int, learning_rate: float,
                   max_depth: int, min_leaf: int = 1,
                   feature_names: list[str] | None = None,
                   target: str = FEED_TARGET) -> GbmModel:
    if n_stages < 0:
        raise ValueError("n_stages must be >= 0")
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must be in (0, 1]")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("training data is empty")

    init = float(y.mean())
    current = np.full(y.shape, init)
    stages: list[tuple[TreeNode, float]] = []
    stage_mse = [float(np.mean((y - current) ** 2))]
    for _ in range(n_stages):
        residuals = y - current
        tree = fit_tree(X, residuals, max_depth, min_leaf)
        current = current + learning_rate * predict_tree_batch(tree, X)
        mse = float(np.mean((y - current) ** 2))
        assert mse <= stage_mse[-1] + MSE_SLACK, \
            f"stage MSE increased: {stage_mse[-1]} -> {mse}"
        stage_mse.append(mse)
        stages.append((tree, learning_rate))
    names = feature_names if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
    return GbmModel(init_value=init, stages=stages, feature_names=list(names),
                    target=target, stage_mse=stage_mse)


def fit_gbm(ds: Dataset, n_stages: int, learning_rate: float, max_depth: int,
            min_leaf: int, feature_names: list[str],
            target: str = FEED_TARGET) -> GbmModel:
    train_idx = ds.indices("train")
    if not train_idx:
        raise ValueError("train split is empty")
    X = np.array([frame_vector(ds.frames[i], feature_names) for i in train_idx])
    y = np.array([ds.targets[target][i] for i in train_idx], dtype=np.float64)
    return fit_gbm_arrays(X, y, n_stages, learning_rate, max_depth, min_leaf,
                          feature_names, target)


def predict_feed(model: GbmModel, frame: FeatureFrame) -> float:
    """Raw staged prediction; arbitration clamps it to [0, max_feed]."""
    try:
        x = frame_vector(frame, model.feature_names)
    except Exception as exc:
        raise SchemaError(str(exc)) from exc
    return model.predict(x)
