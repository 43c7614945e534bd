"""Gradient-boosted accelerated failure time models for vulnerability time-to-fix prediction."""
from .boosting import AFTBoostRegressor, BoostParams, TreeEnsemble, predict, train
from .features import FeatureAssembler, FeatureGroup, FrequencyEncoder, assemble_matrix, embed_text_sum
from .metrics import ConcordanceResult, concordance_index, mean_negloglik
from .schema import FeatureMatrix, load_schema
from .survival import AftParams, Distribution, SurvivalLabel, aft_grad_hess, aft_loss

__version__ = "0.1.0"

__all__ = [
    "AFTBoostRegressor",
    "AftParams",
    "BoostParams",
    "ConcordanceResult",
    "Distribution",
    "FeatureAssembler",
    "FeatureGroup",
    "FeatureMatrix",
    "FrequencyEncoder",
    "SurvivalLabel",
    "TreeEnsemble",
    "aft_grad_hess",
    "aft_loss",
    "assemble_matrix",
    "concordance_index",
    "embed_text_sum",
    "load_schema",
    "mean_negloglik",
    "predict",
    "train",
]
