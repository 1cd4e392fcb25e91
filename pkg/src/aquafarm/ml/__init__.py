"""Four from-scratch learners (forest, SVM, GBM, MLP) plus proposal
arbitration into the control tick."""

from .arbitrate import MlProposal, arbitrate
from .bundle import BundleError, ModelBundle, load_bundle, ml_propose, save_bundle
from .forest import ForestModel, SchemaError, fit_random_forest, predict_setpoints
from .gbm import GbmModel, fit_gbm, predict_feed
from .mlp import MlpModel, fit_mlp_imitation, mlp_forward, predict_equipment
from .svm import SvmModel, fit_linear_svm, predict_health
from .tree import TreeNode, fit_tree, predict_tree

__all__ = [
    "MlProposal", "arbitrate",
    "BundleError", "ModelBundle", "load_bundle", "ml_propose", "save_bundle",
    "ForestModel", "SchemaError", "fit_random_forest", "predict_setpoints",
    "GbmModel", "fit_gbm", "predict_feed",
    "MlpModel", "fit_mlp_imitation", "mlp_forward", "predict_equipment",
    "SvmModel", "fit_linear_svm", "predict_health",
    "TreeNode", "fit_tree", "predict_tree",
]
