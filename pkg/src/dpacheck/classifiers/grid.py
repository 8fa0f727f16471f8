"""Exhaustive hyperparameter search selecting on validation F2.

Cells are enumerated as the Cartesian product of the grid values in key
order; a failing fit is recorded in its cell rather than aborting the
sweep, and ties go to the first enumerated configuration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import DpacheckError, ValidationError
from ..eval import sentence_fbeta
from .base import (
    ClassifierModel,
    FeatureMatrix,
    Hyperparameters,
    SequenceData,
    predict_scores,
    predicted_class,
)
from .bilstm import fit_bilstm
from .forest import fit_forest
from .linear import fit_linear
from .mlp import fit_mlp


def fit_model(algorithm: str, data, hp: Hyperparameters, seed: int) -> ClassifierModel:
    """Train any supported algorithm on already-prepared features."""
    if algorithm in ("logreg", "linear_svm"):
        return fit_linear(algorithm, data, hp, seed)
    if algorithm == "random_forest":
        return fit_forest(data, hp, seed)
    if algorithm == "mlp":
        return fit_mlp(data, hp, seed)
    if algorithm == "bilstm":
        if not isinstance(data, SequenceData):
            raise ValidationError("bilstm needs SequenceData features")
        return fit_bilstm(data, hp, seed)
    raise ValidationError(f"unknown algorithm {algorithm!r}")


def predict_classes(model: ClassifierModel, data, threshold: float | None = None) -> np.ndarray:
    features = data.sequences if isinstance(data, SequenceData) else data.X
    scores = predict_scores(model, features)
    return np.asarray(
        [predicted_class(model, row, threshold) for row in np.atleast_2d(scores)]
    )


@dataclass
class GridCell:
    params: dict
    score: float
    error: str | None = None


def grid_search(
    algorithm: str,
    grid: dict,
    train,
    val,
    seed: int,
    base_hp: Hyperparameters | None = None,
    beta: float = 2.0,
) -> tuple[Hyperparameters, list[GridCell]]:
    """Returns the winning hyperparameters and the full leaderboard."""
    if not grid or any(len(values) == 0 for values in grid.values()):
        raise ValidationError("grid must list at least one value per parameter")
    if train.task != val.task:
        raise ValidationError("train and val must share a task")
    base = base_hp or Hyperparameters()
    positive = train.task.provision_indices

    cells: list[GridCell] = []
    best: GridCell | None = None
    best_hp: Hyperparameters | None = None
    names = list(grid)
    for combo in itertools.product(*(grid[name] for name in names)):
        params = dict(zip(names, combo))
        cell = GridCell(params=params, score=float("nan"))
        try:
            hp = base.replace(**params)
            model = fit_model(algorithm, train, hp, seed)
            predictions = predict_classes(model, val)
            cell.score = sentence_fbeta(val.y, predictions, positive, beta)
        except DpacheckError as exc:
            cell.error = str(exc)
        cells.append(cell)
        if cell.error is None and (best is None or cell.score > best.score):
            best = cell
            best_hp = hp
    if best is None:
        raise ValidationError("every grid cell failed to train")
    return best_hp, cells


def leaderboard_table(cells: list[GridCell], delimiter: str = "\t") -> str:
    """Delimited leaderboard, one row per cell in enumeration order."""
    if not cells:
        return ""
    names = list(cells[0].params)
    lines = [delimiter.join([*names, "f2", "error"])]
    for cell in cells:
        score = "" if np.isnan(cell.score) else f"{cell.score:.4f}"
        lines.append(
            delimiter.join(
                [*(repr(cell.params[n]) for n in names), score, cell.error or "-"]
            )
        )
    return "\n".join(lines) + "\n"
