"""Bidirectional recurrent classifier over token-vector sequences.

One gated recurrent pass per direction (gate order: input, forget, output,
candidate); the classifier head sees the concatenation of the last forward
and last backward hidden states. With all parameters zero every gate
pre-activation is zero, hidden states stay zero, and the head emits uniform
probabilities; tests lean on that closed form.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError
from .base import (
    SCORERS,
    ClassifierModel,
    Hyperparameters,
    SequenceData,
    minibatches,
    require_all_classes,
    sigmoid,
    softmax,
)

PARAM_NAMES = ("W_fwd", "U_fwd", "b_fwd", "W_bwd", "U_bwd", "b_bwd", "W_head", "b_head")


def init_bilstm_params(dim: int, hidden: int, n_classes: int, rng) -> dict:
    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return {
        "W_fwd": uniform((4 * hidden, dim), dim),
        "U_fwd": uniform((4 * hidden, hidden), hidden),
        "b_fwd": np.zeros(4 * hidden),
        "W_bwd": uniform((4 * hidden, dim), dim),
        "U_bwd": uniform((4 * hidden, hidden), hidden),
        "b_bwd": np.zeros(4 * hidden),
        "W_head": uniform((n_classes, 2 * hidden), 2 * hidden),
        "b_head": np.zeros(n_classes),
    }


def _cell(W, U, b, x_t, h_prev, c_prev):
    hidden = U.shape[1]
    z = W @ x_t + U @ h_prev + b
    i = sigmoid(z[:hidden])
    f = sigmoid(z[hidden : 2 * hidden])
    o = sigmoid(z[2 * hidden : 3 * hidden])
    g = np.tanh(z[3 * hidden :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, (x_t, h_prev, c_prev, i, f, o, g, c)


def lstm_direction_states(W, U, b, xs: np.ndarray) -> np.ndarray:
    """All hidden states (T, H) of one directional pass over ``xs``."""
    hidden = U.shape[1]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    states = []
    for x_t in xs:
        h, c, _ = _cell(W, U, b, x_t, h, c)
        states.append(h)
    return np.asarray(states)


def _run_direction(W, U, b, xs):
    hidden = U.shape[1]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    caches = []
    for x_t in xs:
        h, c, cache = _cell(W, U, b, x_t, h, c)
        caches.append(cache)
    return h, caches


def _backprop_direction(W, U, b, caches, dh_final):
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros_like(b)
    dh = dh_final
    dc = np.zeros_like(dh_final)
    for x_t, h_prev, c_prev, i, f, o, g, c in reversed(caches):
        tanh_c = np.tanh(c)
        do = dh * tanh_c
        dct = dh * o * (1.0 - tanh_c**2) + dc
        di = dct * g
        dg = dct * i
        df = dct * c_prev
        dc = dct * f
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g**2)]
        )
        dW += np.outer(dz, x_t)
        dU += np.outer(dz, h_prev)
        db += dz
        dh = U.T @ dz
    return dW, dU, db


def bilstm_representation(params: dict, xs: np.ndarray):
    """Concatenated final hidden states plus the caches for backprop."""
    h_fwd, cache_fwd = _run_direction(
        params["W_fwd"], params["U_fwd"], params["b_fwd"], xs
    )
    h_bwd, cache_bwd = _run_direction(
        params["W_bwd"], params["U_bwd"], params["b_bwd"], xs[::-1]
    )
    return np.concatenate([h_fwd, h_bwd]), cache_fwd, cache_bwd


def bilstm_loss_and_grad(params: dict, sequences, y, n_classes: int, masks=None):
    """Mean cross-entropy over sequences and gradients for every parameter."""
    n = len(sequences)
    hidden = params["U_fwd"].shape[1]
    grads = {name: np.zeros_like(params[name]) for name in PARAM_NAMES}
    loss = 0.0
    for idx, xs in enumerate(sequences):
        rep, cache_fwd, cache_bwd = bilstm_representation(params, xs)
        dropped = rep if masks is None else rep * masks[idx]
        logits = params["W_head"] @ dropped + params["b_head"]
        probs = softmax(logits)
        loss -= float(np.log(probs[y[idx]] + 1e-12))

        dlogits = probs.copy()
        dlogits[y[idx]] -= 1.0
        dlogits /= n
        grads["W_head"] += np.outer(dlogits, dropped)
        grads["b_head"] += dlogits
        drep = params["W_head"].T @ dlogits
        if masks is not None:
            drep = drep * masks[idx]
        dW, dU, db = _backprop_direction(
            params["W_fwd"], params["U_fwd"], params["b_fwd"], cache_fwd, drep[:hidden]
        )
        grads["W_fwd"] += dW
        grads["U_fwd"] += dU
        grads["b_fwd"] += db
        dW, dU, db = _backprop_direction(
            params["W_bwd"], params["U_bwd"], params["b_bwd"], cache_bwd, drep[hidden:]
        )
        grads["W_bwd"] += dW
        grads["U_bwd"] += dU
        grads["b_bwd"] += db
    return loss / n, grads


def fit_bilstm(data: SequenceData, hp: Hyperparameters, seed: int) -> ClassifierModel:
    counts = np.bincount(data.y, minlength=data.task.n_classes)
    require_all_classes(counts, data.task)
    rng = np.random.Generator(np.random.PCG64(seed))
    params = init_bilstm_params(data.dim, hp.lstm_hidden, data.task.n_classes, rng)

    loss = float("nan")
    for epoch in range(hp.epochs):
        for idx in minibatches(data.n, hp.batch_size, rng):
            batch = [data.sequences[i] for i in idx]
            masks = None
            if hp.dropout > 0.0:
                masks = [
                    (rng.random(2 * hp.lstm_hidden) >= hp.dropout) / (1.0 - hp.dropout)
                    for _ in idx
                ]
            _, grads = bilstm_loss_and_grad(
                params, batch, data.y[idx], data.task.n_classes, masks
            )
            params = {
                name: params[name] - hp.learning_rate * grads[name]
                for name in PARAM_NAMES
            }
        loss, _ = bilstm_loss_and_grad(
            params, data.sequences, data.y, data.task.n_classes
        )
        if not np.isfinite(loss):
            raise DivergenceError(epoch + 1, loss)

    return ClassifierModel(
        algorithm="bilstm",
        task=data.task,
        hyperparameters=hp,
        seed=seed,
        arrays=dict(params),
        training_meta={
            "dim": data.dim,
            "n_examples": data.n,
            "epochs_run": hp.epochs,
            "final_loss": float(loss),
        },
    )


def _bilstm_scores(model: ClassifierModel, sequences) -> np.ndarray:
    params = {name: model.arrays[name] for name in PARAM_NAMES}
    out = []
    for xs in sequences:
        xs = np.asarray(xs, dtype=np.float64)
        rep, _, _ = bilstm_representation(params, xs)
        out.append(softmax(params["W_head"] @ rep + params["b_head"]))
    return np.asarray(out)


SCORERS["bilstm"] = _bilstm_scores
