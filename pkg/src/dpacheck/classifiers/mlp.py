"""Feedforward network: ReLU hidden layers, dropout, softmax cross-entropy.

Dropout (inverted scaling) is applied to hidden activations during training
only. The loss/gradient function takes explicit dropout masks so the
analytic gradient stays a deterministic function of its inputs and can be
finite-difference checked.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError
from .base import (
    SCORERS,
    ClassifierModel,
    FeatureMatrix,
    Hyperparameters,
    minibatches,
    require_all_classes,
    softmax,
)


def init_mlp_layers(dim: int, hidden_sizes, n_classes: int, rng) -> list:
    """Uniform fan-in-scaled weights, zero biases: [(W, b), ...]."""
    sizes = [dim, *hidden_sizes, n_classes]
    layers = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append(
            (rng.uniform(-bound, bound, size=(fan_out, fan_in)), np.zeros(fan_out))
        )
    return layers


def mlp_forward(layers, X, masks=None):
    """Returns (logits, pre-activations, layer inputs)."""
    inputs = [X]
    pre = []
    a = X
    for l, (W, b) in enumerate(layers[:-1]):
        z = a @ W.T + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        if masks is not None:
            h = h * masks[l]
        inputs.append(h)
        a = h
    W_out, b_out = layers[-1]
    return a @ W_out.T + b_out, pre, inputs


def mlp_loss_and_grad(layers, X, y, masks=None):
    """Mean cross-entropy and per-layer (dW, db) gradients."""
    n = X.shape[0]
    logits, pre, inputs = mlp_forward(layers, X, masks)
    probs = softmax(logits)
    loss = -np.mean(np.log(probs[np.arange(n), y] + 1e-12))

    grads = [None] * len(layers)
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grads[-1] = (dlogits.T @ inputs[-1], dlogits.sum(axis=0))
    da = dlogits @ layers[-1][0]
    for l in range(len(layers) - 2, -1, -1):
        if masks is not None:
            da = da * masks[l]
        dz = da * (pre[l] > 0)
        grads[l] = (dz.T @ inputs[l], dz.sum(axis=0))
        da = dz @ layers[l][0]
    return loss, grads


def fit_mlp(data: FeatureMatrix, hp: Hyperparameters, seed: int) -> ClassifierModel:
    require_all_classes(data.class_counts(), data.task)
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = init_mlp_layers(data.dim, hp.hidden_sizes, data.task.n_classes, rng)

    loss = float("nan")
    for epoch in range(hp.epochs):
        for idx in minibatches(data.n, hp.batch_size, rng):
            masks = None
            if hp.dropout > 0.0:
                masks = [
                    (rng.random((len(idx), W.shape[0])) >= hp.dropout)
                    / (1.0 - hp.dropout)
                    for W, _ in layers[:-1]
                ]
            _, grads = mlp_loss_and_grad(layers, data.X[idx], data.y[idx], masks)
            layers = [
                (W - hp.learning_rate * dW, b - hp.learning_rate * db)
                for (W, b), (dW, db) in zip(layers, grads)
            ]
        loss, _ = mlp_loss_and_grad(layers, data.X, data.y)
        if not np.isfinite(loss):
            raise DivergenceError(epoch + 1, loss)

    arrays = {}
    for l, (W, b) in enumerate(layers):
        arrays[f"W{l}"] = W
        arrays[f"b{l}"] = b
    return ClassifierModel(
        algorithm="mlp",
        task=data.task,
        hyperparameters=hp,
        seed=seed,
        arrays=arrays,
        training_meta={
            "dim": data.dim,
            "n_examples": data.n,
            "epochs_run": hp.epochs,
            "final_loss": float(loss),
        },
    )


def layers_from_arrays(arrays: dict) -> list:
    count = sum(1 for name in arrays if name.startswith("W"))
    return [(arrays[f"W{l}"], arrays[f"b{l}"]) for l in range(count)]


def _mlp_scores(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    logits, _, _ = mlp_forward(layers_from_arrays(model.arrays), X)
    return softmax(logits)


SCORERS["mlp"] = _mlp_scores
