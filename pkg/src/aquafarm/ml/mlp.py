"""Single-hidden-layer perceptron that clones the rule controller.

Architecture is fixed: n_in -> n_hidden (ReLU) -> 5 logistic units, one
per device (motor, heater, cooler, humidifier, dehumidifier). Training is
plain minibatch SGD by backpropagation on the mean binary cross-entropy
over all sample/unit pairs. A unit fires when its probability exceeds 0.5;
exactly 0.5 stays off.

Inputs are standardized with stats frozen at fit time, like the SVM.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..preprocess import FeatureFrame, frame_vector
from .forest import SchemaError

OUTPUT_DEVICES = ("motor", "heater", "cooler", "humidifier", "dehumidifier")
N_OUT = len(OUTPUT_DEVICES)
_EPS = 1e-12   # log() guard in the loss


@dataclass
class MlpModel:
    w1: np.ndarray            # (n_in, n_hidden)
    b1: np.ndarray            # (n_hidden,)
    w2: np.ndarray            # (n_hidden, 5)
    b2: np.ndarray            # (5,)
    feature_names: list[str]
    means: np.ndarray
    stds: np.ndarray
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def layer_sizes(self) -> tuple[int, int, int]:
        return (self.w1.shape[0], self.w1.shape[1], self.w2.shape[1])


def init_mlp(n_in: int, n_hidden: int, feature_names: list[str],
             rng: np.random.Generator,
             means: np.ndarray | None = None,
             stds: np.ndarray | None = None) -> MlpModel:
    w1 = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_hidden))
    w2 = rng.normal(0.0, np.sqrt(2.0 / n_hidden), size=(n_hidden, N_OUT))
    return MlpModel(
        w1=w1, b1=np.zeros(n_hidden), w2=w2, b2=np.zeros(N_OUT),
        feature_names=list(feature_names),
        means=means if means is not None else np.zeros(n_in),
        stds=stds if stds is not None else np.ones(n_in))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Probabilities for standardized input rows, shape (n, 5).

    Clipped a hair inside (0, 1) so saturated logits cannot round to the
    closed endpoints in float64.
    """
    h = np.maximum(0.0, X @ model.w1 + model.b1)
    return np.clip(_sigmoid(h @ model.w2 + model.b2), 1e-15, 1.0 - 1e-15)


def mlp_forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Probabilities in (0,1)^5 for one raw feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.w1.shape[0],):
        raise SchemaError(f"expected {model.w1.shape[0]} inputs, got {x.shape}")
    xs = (x - model.means) / model.stds
    return forward_batch(model, xs[None, :])[0]


def bce_loss(probs: np.ndarray, Y: np.ndarray) -> float:
    p = np.clip(probs, _EPS, 1.0 - _EPS)
    return float(-np.mean(Y * np.log(p) + (1.0 - Y) * np.log(1.0 - p)))


def loss_and_grads(model: MlpModel, X: np.ndarray, Y: np.ndarray,
                   ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean BCE over all sample/unit pairs and its analytic gradients.

    X must already be standardized. The finite-difference oracle in the
    test suite checks these gradients parameter by parameter.
    """
    n = X.shape[0]
    z1 = X @ model.w1 + model.b1
    h = np.maximum(0.0, z1)
    probs = _sigmoid(h @ model.w2 + model.b2)
    loss = bce_loss(probs, Y)

    dz2 = (probs - Y) / (n * N_OUT)
    grads = {
        "w2": h.T @ dz2,
        "b2": dz2.sum(axis=0),
    }
    dh = dz2 @ model.w2.T
    dh[z1 <= 0] = 0.0
    grads["w1"] = X.T @ dh
    grads["b1"] = dh.sum(axis=0)
    return loss, grads


def fit_mlp_imitation(X: np.ndarray, Y: np.ndarray, epochs: int, lr: float,
                      batch: int, rng: np.random.Generator,
                      n_hidden: int = 16,
                      feature_names: list[str] | None = None) -> MlpModel:
    """Clone the 5 on/off decisions in Y (rows aligned with X).

    X is raw (unstandardized); stats are computed here and frozen. With
    epochs=0 the freshly initialized model is returned untouched.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("training data is empty")
    if Y.shape != (X.shape[0], N_OUT):
        raise ValueError(f"Y must be (n, {N_OUT})")
    names = feature_names if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[stds == 0] = 1.0
    Xs = (X - means) / stds

    model = init_mlp(X.shape[1], n_hidden, names, rng, means, stds)
    n = X.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            sel = order[start:start + batch]
            _, grads = loss_and_grads(model, Xs[sel], Y[sel])
            model.w1 -= lr * grads["w1"]
            model.b1 -= lr * grads["b1"]
            model.w2 -= lr * grads["w2"]
            model.b2 -= lr * grads["b2"]
        model.epoch_losses.append(bce_loss(forward_batch(model, Xs), Y))
    return model


def predict_equipment(model: MlpModel, frame: FeatureFrame) -> dict[str, float]:
    """Per-device firing probability for one frame."""
    try:
        x = frame_vector(frame, model.feature_names)
    except Exception as exc:
        raise SchemaError(str(exc)) from exc
    probs = mlp_forward(model, x)
    return dict(zip(OUTPUT_DEVICES, (float(p) for p in probs)))


def agreement(model: MlpModel, X: np.ndarray, Y: np.ndarray) -> float:
    """Fraction of rows where all five thresholded outputs match Y."""
    Xs = (np.asarray(X, dtype=np.float64) - model.means) / model.stds
    actions = forward_batch(model, Xs) > 0.5
    return float(np.mean(np.all(actions == (np.asarray(Y) > 0.5), axis=1)))
