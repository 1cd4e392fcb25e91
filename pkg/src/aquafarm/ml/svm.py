"""Linear SVM for the fish health early-warning task.

Trains by stochastic subgradient descent on the regularized hinge
objective

    J(w, b) = lambda/2 * ||w||^2 + mean_i max(0, 1 - y_i (w.x_i + b))

with the classic 1/(lambda*t) step schedule for w. The unregularized bias
gets a bounded 1/t step during the scan plus an exact line search at every
epoch end (J is piecewise linear in b, so the minimum sits on a breakpoint
y_i - w.x_i). On small instances an exact convex scale search along the
iterate direction removes the tail oscillation of the schedule. The best
(w, b) by full objective is kept across epochs, with tail-averaged
iterates offered as additional candidates, so the returned parameters
never regress.

Features are standardized on the train split and the stats frozen into
the model. Score 0 maps to the healthy class (-1): silence wins ties for
an alarm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..preprocess import Dataset, FeatureFrame, frame_vector
from .forest import SchemaError

DISEASE_TARGET = "diseased"
SCALE_POLISH_MAX_N = 500     # exact scale search is O(n^2) per epoch
BIAS_CANDIDATE_CAP = 512


@dataclass
class SvmModel:
    weights: np.ndarray
    bias: float
    lam: float
    feature_names: list[str]
    means: np.ndarray
    stds: np.ndarray


def hinge_objective(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float,
                    lam: float) -> float:
    margins = 1.0 - y * (X @ w + b)
    return float(0.5 * lam * np.dot(w, w) + np.mean(np.maximum(0.0, margins)))


def _min_hinge_over_bias(scores: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Exact minimum of the mean hinge over b for fixed scores = X @ w."""
    cands = y - scores
    if cands.shape[0] > BIAS_CANDIDATE_CAP:
        cands = np.quantile(cands, np.linspace(0.0, 1.0, BIAS_CANDIDATE_CAP))
    margins = 1.0 - y[None, :] * (scores[None, :] + cands[:, None])
    hinge = np.maximum(0.0, margins).mean(axis=1)
    k = int(np.argmin(hinge))
    return float(hinge[k]), float(cands[k])


def _polish_scale(X: np.ndarray, y: np.ndarray, w: np.ndarray, lam: float,
                  ) -> tuple[np.ndarray, float, float]:
    """Golden-section search over c >= 0 of min_b J(c*w, b); J is convex in c."""
    scores = X @ w
    ww = float(np.dot(w, w))

    def f(c: float) -> tuple[float, float]:
        hinge, b = _min_hinge_over_bias(c * scores, y)
        return 0.5 * lam * c * c * ww + hinge, b

    lo, hi = 0.0, 2.0 / math.sqrt(lam * max(ww, 1e-12))
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c1 = hi - gr * (hi - lo)
    c2 = lo + gr * (hi - lo)
    f1, _ = f(c1)
    f2, _ = f(c2)
    for _ in range(60):
        if f1 < f2:
            hi, c2, f2 = c2, c1, f1
            c1 = hi - gr * (hi - lo)
            f1, _ = f(c1)
        else:
            lo, c1, f1 = c1, c2, f2
            c2 = lo + gr * (hi - lo)
            f2, _ = f(c2)
    c = (lo + hi) / 2.0
    obj, bias = f(c)
    return c * w, bias, obj


def pegasos_fit(X: np.ndarray, y: np.ndarray, lam: float, epochs: int,
                rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Core SGD on raw arrays; returns the best (w, b) seen at epoch ends."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValueError("labels must be +-1")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present in the training data")
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    best_w, best_b = w.copy(), b
    best_obj = hinge_objective(X, y, w, b, lam)
    avg_w = np.zeros(d)
    avg_b = 0.0
    avg_n = 0
    tail = max(1, epochs // 2)
    t = 0
    for ep in range(epochs):
        for _ in range(n):
            t += 1
            i = int(rng.integers(0, n))
            eta = 1.0 / (lam * t)
            if y[i] * (X[i] @ w + b) < 1.0:
                w = (1.0 - eta * lam) * w + eta * y[i] * X[i]
                b += y[i] / t
            else:
                w = (1.0 - eta * lam) * w
            if ep >= tail:
                avg_n += 1
                avg_w += (w - avg_w) / avg_n
                avg_b += (b - avg_b) / avg_n
        candidates = [w] if ep < tail else [w, avg_w]
        for cand in candidates:
            if not np.any(cand):
                continue
            if n <= SCALE_POLISH_MAX_N:
                cw, cb, obj = _polish_scale(X, y, cand, lam)
            else:
                hinge, cb = _min_hinge_over_bias(X @ cand, y)
                cw = cand
                obj = 0.5 * lam * float(np.dot(cand, cand)) + hinge
            if obj < best_obj:
                best_obj = obj
                best_w, best_b = cw.copy(), cb
    return best_w, best_b


def fit_linear_svm(ds: Dataset, lam: float, epochs: int, rng: np.random.Generator,
                   feature_names: list[str], target: str = DISEASE_TARGET) -> SvmModel:
    """Fit on the train split with frozen standardization stats."""
    train_idx = ds.indices("train")
    if not train_idx:
        raise ValueError("train split is empty")
    X = np.array([frame_vector(ds.frames[i], feature_names) for i in train_idx])
    y = np.array([ds.targets[target][i] for i in train_idx], dtype=np.float64)
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[stds == 0] = 1.0
    Xs = (X - means) / stds
    w, b = pegasos_fit(Xs, y, lam, epochs, rng)
    return SvmModel(weights=w, bias=b, lam=lam,
                    feature_names=list(feature_names), means=means, stds=stds)


def svm_score(model: SvmModel, frame: FeatureFrame) -> float:
    try:
        x = frame_vector(frame, model.feature_names)
    except Exception as exc:
        raise SchemaError(str(exc)) from exc
    xs = (x - model.means) / model.stds
    return float(xs @ model.weights + model.bias)


def predict_health(model: SvmModel, frame: FeatureFrame) -> dict:
    """+1 = affected, -1 = healthy; score is the signed margin."""
    score = svm_score(model, frame)
    return {"label": 1 if score > 0 else -1, "score": score}
