"""Gradient boosting: staged residual fitting and its monotone training MSE."""

import numpy as np
import pytest

from aquafarm.ml.gbm import GbmModel, fit_gbm_arrays
from aquafarm.ml.tree import TreeNode


class TestFitGbm:
    def test_constant_target_degenerate_stages(self):
        X = np.array([[1.0], [2.0], [3.0]])
        y = np.array([4.0, 4.0, 4.0])
        model = fit_gbm_arrays(X, y, n_stages=5, learning_rate=0.5, max_depth=2)
        assert model.init_value == 4.0
        for x in X:
            assert model.predict(x) == 4.0
        for tree, _ in model.stages:
            assert tree.is_leaf and tree.prediction == 0.0

    def test_zero_stages_predicts_mean(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([2.0, 6.0])
        model = fit_gbm_arrays(X, y, n_stages=0, learning_rate=0.1, max_depth=2)
        assert model.predict(np.array([0.5])) == 4.0

    def test_single_stump_full_rate_reproduces_step(self):
        # residual oracle: init 5, stump splits at 2.5 with leaves -5 / +5
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        model = fit_gbm_arrays(X, y, n_stages=1, learning_rate=1.0, max_depth=1)
        assert model.init_value == 5.0
        tree, lr = model.stages[0]
        assert tree.threshold == 2.5
        preds = [model.predict(x) for x in X]
        assert preds == [0.0, 0.0, 10.0, 10.0]

    def test_stage_mse_non_increasing_100_stages(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 10, size=(150, 3))
        y = np.sin(X[:, 0]) + 0.5 * X[:, 1] + rng.normal(0, 0.1, size=150)
        model = fit_gbm_arrays(X, y, n_stages=100, learning_rate=0.1, max_depth=2,
                               min_leaf=2)
        mses = model.stage_mse
        assert len(mses) == 101
        for a, b in zip(mses, mses[1:]):
            assert b <= a + 1e-9
        assert mses[-1] < mses[0] * 0.2   # it actually learned something

    def test_negative_stages_rejected(self):
        with pytest.raises(ValueError):
            fit_gbm_arrays(np.ones((2, 1)), np.ones(2), -1, 0.1, 2)

    def test_bad_learning_rate_rejected(self):
        with pytest.raises(ValueError):
            fit_gbm_arrays(np.ones((2, 1)), np.ones(2), 3, 1.5, 2)
        with pytest.raises(ValueError):
            fit_gbm_arrays(np.ones((2, 1)), np.ones(2), 3, 0.0, 2)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(60, 2))
        y = rng.normal(size=60)
        m1 = fit_gbm_arrays(X, y, 20, 0.1, 2)
        m2 = fit_gbm_arrays(X, y, 20, 0.1, 2)
        probe = rng.normal(size=(10, 2))
        assert [m1.predict(x) for x in probe] == [m2.predict(x) for x in probe]


class TestPredict:
    def test_init_only(self):
        model = GbmModel(init_value=3.0, stages=[], feature_names=["x0"], stage_mse=[0.0])
        assert model.predict(np.array([123.0])) == 3.0

    def test_init_plus_scaled_stump(self):
        stump = TreeNode(feature_index=0, threshold=2.5,
                         left=TreeNode(prediction=-1.0),
                         right=TreeNode(prediction=1.0))
        model = GbmModel(init_value=3.0, stages=[(stump, 0.5)],
                         feature_names=["x0"], stage_mse=[0.0])
        assert model.predict(np.array([1.0])) == 2.5
        assert model.predict(np.array([3.0])) == 3.5

    def test_memorizing_model_reproduces_labels(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(size=(25, 1))
        y = rng.normal(size=25)
        model = fit_gbm_arrays(X, y, n_stages=1, learning_rate=1.0, max_depth=25)
        assert np.allclose([model.predict(x) for x in X], y)
