"""Bayesian neural additive models with feature dropout, plus the closed-form
accuracy analysis of equal-weight classifiers under dropout."""

from .analytic import delta_p, lemma1_accuracy, lemma2_bound, mc_oracle, p_acc, theorem1_report
from .dataset import Dataset
from .explain import explain, feature_contribution, inconsistency_score, mapping_grid, train_means
from .model import NamConfig, NamModel, build_model, fit, nam_forward, predict, train, train_ensemble
from .nn import SgdConfig, make_rng
from .synthetic import ToySpec, gen_toy

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "NamConfig",
    "NamModel",
    "SgdConfig",
    "ToySpec",
    "build_model",
    "delta_p",
    "explain",
    "feature_contribution",
    "fit",
    "gen_toy",
    "inconsistency_score",
    "lemma1_accuracy",
    "lemma2_bound",
    "make_rng",
    "mapping_grid",
    "mc_oracle",
    "nam_forward",
    "p_acc",
    "predict",
    "theorem1_report",
    "train",
    "train_ensemble",
    "train_means",
]
