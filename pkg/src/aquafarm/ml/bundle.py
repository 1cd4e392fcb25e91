"""Trained-model container and its schema-versioned JSON form.

A bundle holds the four learners plus training metadata (seed, dataset
hash, metrics). ml_propose runs all four predictors on one frame and is a
pure function of (bundle, frame).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..preprocess import FeatureFrame
from .arbitrate import MlProposal
from .forest import ForestModel, predict_setpoints
from .gbm import GbmModel, predict_feed
from .mlp import MlpModel, predict_equipment
from .svm import SvmModel, predict_health
from .tree import tree_from_dict, tree_to_dict

FORMAT_VERSION = 1


class BundleError(ValueError):
    """Bundle missing, untrained, or serialized with an unknown schema."""


@dataclass
class ModelBundle:
    forest: Optional[ForestModel] = None
    svm: Optional[SvmModel] = None
    gbm: Optional[GbmModel] = None
    mlp: Optional[MlpModel] = None
    metadata: dict = field(default_factory=dict)

    def require_trained(self) -> None:
        missing = [name for name in ("forest", "svm", "gbm", "mlp")
                   if getattr(self, name) is None]
        if missing:
            raise BundleError(f"bundle is untrained: missing {', '.join(missing)}")


def ml_propose(bundle: ModelBundle, frame: FeatureFrame) -> MlProposal:
    """Run all four predictors on one frame."""
    bundle.require_trained()
    health = predict_health(bundle.svm, frame)
    return MlProposal(
        setpoints=predict_setpoints(bundle.forest, frame),
        health_label=health["label"],
        health_score=health["score"],
        feed_g_per_tick=predict_feed(bundle.gbm, frame),
        equipment_probs=predict_equipment(bundle.mlp, frame))


def bundle_to_dict(bundle: ModelBundle) -> dict:
    bundle.require_trained()
    return {
        "format_version": FORMAT_VERSION,
        "forest": {
            "trees": {t: [tree_to_dict(root) for root in roots]
                      for t, roots in bundle.forest.trees.items()},
            "n_features_per_split": bundle.forest.n_features_per_split,
            "feature_names": bundle.forest.feature_names,
            "targets": list(bundle.forest.targets),
            "max_depth": bundle.forest.max_depth,
            "min_leaf": bundle.forest.min_leaf,
        },
        "svm": {
            "weights": bundle.svm.weights.tolist(),
            "bias": bundle.svm.bias,
            "lambda": bundle.svm.lam,
            "feature_names": bundle.svm.feature_names,
            "means": bundle.svm.means.tolist(),
            "stds": bundle.svm.stds.tolist(),
        },
        "gbm": {
            "init_value": bundle.gbm.init_value,
            "stages": [{"tree": tree_to_dict(t), "learning_rate": lr}
                       for t, lr in bundle.gbm.stages],
            "feature_names": bundle.gbm.feature_names,
            "target": bundle.gbm.target,
            "stage_mse": bundle.gbm.stage_mse,
        },
        "mlp": {
            "w1": bundle.mlp.w1.tolist(),
            "b1": bundle.mlp.b1.tolist(),
            "w2": bundle.mlp.w2.tolist(),
            "b2": bundle.mlp.b2.tolist(),
            "feature_names": bundle.mlp.feature_names,
            "means": bundle.mlp.means.tolist(),
            "stds": bundle.mlp.stds.tolist(),
        },
        "metadata": bundle.metadata,
    }


def bundle_from_dict(doc: dict) -> ModelBundle:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle format_version {version!r}")
    f = doc["forest"]
    forest = ForestModel(
        trees={t: [tree_from_dict(d) for d in roots] for t, roots in f["trees"].items()},
        n_features_per_split=int(f["n_features_per_split"]),
        feature_names=list(f["feature_names"]),
        targets=tuple(f["targets"]),
        max_depth=int(f["max_depth"]),
        min_leaf=int(f["min_leaf"]))
    s = doc["svm"]
    svm = SvmModel(
        weights=np.array(s["weights"], dtype=np.float64),
        bias=float(s["bias"]), lam=float(s["lambda"]),
        feature_names=list(s["feature_names"]),
        means=np.array(s["means"], dtype=np.float64),
        stds=np.array(s["stds"], dtype=np.float64))
    g = doc["gbm"]
    gbm = GbmModel(
        init_value=float(g["init_value"]),
        stages=[(tree_from_dict(st["tree"]), float(st["learning_rate"]))
                for st in g["stages"]],
        feature_names=list(g["feature_names"]),
        target=g["target"],
        stage_mse=list(g["stage_mse"]))
    m = doc["mlp"]
    mlp = MlpModel(
        w1=np.array(m["w1"], dtype=np.float64),
        b1=np.array(m["b1"], dtype=np.float64),
        w2=np.array(m["w2"], dtype=np.float64),
        b2=np.array(m["b2"], dtype=np.float64),
        feature_names=list(m["feature_names"]),
        means=np.array(m["means"], dtype=np.float64),
        stds=np.array(m["stds"], dtype=np.float64))
    return ModelBundle(forest=forest, svm=svm, gbm=gbm, mlp=mlp,
                       metadata=dict(doc.get("metadata", {})))


def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    Path(path).write_text(json.dumps(bundle_to_dict(bundle)) + "\n")


def load_bundle(path: str | Path) -> ModelBundle:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle file is not valid JSON: {exc}") from exc
    return bundle_from_dict(doc)
