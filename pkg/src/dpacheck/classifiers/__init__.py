"""Native classifier implementations over embedding features."""

from .base import (
    ALGORITHMS,
    DEFAULT_GRID,
    ENCODER_FINETUNE_GRID,
    OTHER_LABEL,
    ClassifierModel,
    FeatureMatrix,
    Hyperparameters,
    SequenceData,
    TaskSpec,
    predict_scores,
    predicted_class,
)
from .bilstm import fit_bilstm
from .forest import fit_forest, gini_impurity
from .grid import GridCell, fit_model, grid_search, leaderboard_table, predict_classes
from .linear import fit_linear
from .mlp import fit_mlp

__all__ = [
    "ALGORITHMS",
    "DEFAULT_GRID",
    "ENCODER_FINETUNE_GRID",
    "OTHER_LABEL",
    "ClassifierModel",
    "FeatureMatrix",
    "Hyperparameters",
    "SequenceData",
    "TaskSpec",
    "GridCell",
    "fit_bilstm",
    "fit_forest",
    "fit_linear",
    "fit_mlp",
    "fit_model",
    "gini_impurity",
    "grid_search",
    "leaderboard_table",
    "predict_classes",
    "predict_scores",
    "predicted_class",
]
