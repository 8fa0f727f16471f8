"""Logistic regression and linear SVM trained by mini-batch gradient descent.

Both start from all-zero parameters, so an untrained binary logreg scores
0.5 everywhere. The loss/gradient functions are module-level so their
analytic gradients can be checked against finite differences directly.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError, ValidationError
from .base import (
    SCORERS,
    ClassifierModel,
    FeatureMatrix,
    Hyperparameters,
    minibatches,
    require_all_classes,
    sigmoid,
    softmax,
)


def logreg_loss_and_grad(weights, bias, X, y, mode: str):
    """Mean cross-entropy and its gradient.

    Binary uses a single sigmoid row (class 0 is the positive class);
    multiclass uses softmax over one row per class.
    """
    n = X.shape[0]
    if mode == "binary":
        z = X @ weights[0] + bias[0]
        p = sigmoid(z)
        t = (y == 0).astype(np.float64)
        eps = 1e-12
        loss = -np.mean(t * np.log(p + eps) + (1 - t) * np.log(1 - p + eps))
        dz = (p - t) / n
        return loss, (X.T @ dz)[None, :], np.array([dz.sum()])
    logits = X @ weights.T + bias
    probs = softmax(logits)
    loss = -np.mean(np.log(probs[np.arange(n), y] + 1e-12))
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, dlogits.T @ X, dlogits.sum(axis=0)


def svm_loss_and_grad(weights, bias, X, y, mode: str, l2: float):
    """Mean hinge loss (one row per class, one-vs-rest) plus L2 on weights."""
    n = X.shape[0]
    if mode == "binary":
        signs = np.where(y == 0, 1.0, -1.0)[:, None]
    else:
        signs = np.where(np.arange(weights.shape[0])[None, :] == y[:, None], 1.0, -1.0)
    margins = X @ weights.T + bias
    slack = 1.0 - signs * margins
    violating = (slack > 0).astype(np.float64)
    loss = slack[slack > 0].sum() / n + 0.5 * l2 * float(np.sum(weights**2))
    dmargins = -(signs * violating) / n
    dW = dmargins.T @ X + l2 * weights
    db = dmargins.sum(axis=0)
    return loss, dW, db


def fit_linear(
    kind: str, data: FeatureMatrix, hp: Hyperparameters, seed: int
) -> ClassifierModel:
    """Train logreg or linear_svm; deterministic for a fixed seed."""
    if kind not in ("logreg", "linear_svm"):
        raise ValidationError(f"fit_linear got unknown kind {kind!r}")
    require_all_classes(data.class_counts(), data.task)

    n_rows = 1 if data.task.mode == "binary" else data.task.n_classes
    weights = np.zeros((n_rows, data.dim))
    bias = np.zeros(n_rows)

    if kind == "logreg":
        def loss_grad(w, b, X, y):
            return logreg_loss_and_grad(w, b, X, y, data.task.mode)
    else:
        def loss_grad(w, b, X, y):
            return svm_loss_and_grad(w, b, X, y, data.task.mode, hp.l2)

    rng = np.random.Generator(np.random.PCG64(seed))
    loss = float("nan")
    for epoch in range(hp.epochs):
        for idx in minibatches(data.n, hp.batch_size, rng):
            _, dW, db = loss_grad(weights, bias, data.X[idx], data.y[idx])
            weights -= hp.learning_rate * dW
            bias -= hp.learning_rate * db
        loss, _, _ = loss_grad(weights, bias, data.X, data.y)
        if not np.isfinite(loss):
            raise DivergenceError(epoch + 1, loss)

    return ClassifierModel(
        algorithm=kind,
        task=data.task,
        hyperparameters=hp,
        seed=seed,
        arrays={"weights": weights, "bias": bias},
        training_meta={
            "dim": data.dim,
            "n_examples": data.n,
            "epochs_run": hp.epochs,
            "final_loss": float(loss),
        },
    )


def _logreg_scores(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    weights, bias = model.arrays["weights"], model.arrays["bias"]
    if model.task.mode == "binary":
        p = sigmoid(X @ weights[0] + bias[0])
        return np.stack([p, 1.0 - p], axis=1)
    return softmax(X @ weights.T + bias)


def _svm_scores(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    weights, bias = model.arrays["weights"], model.arrays["bias"]
    margins = X @ weights.T + bias
    if model.task.mode == "binary":
        return np.stack([margins[:, 0], -margins[:, 0]], axis=1)
    return margins


SCORERS["logreg"] = _logreg_scores
SCORERS["linear_svm"] = _svm_scores
