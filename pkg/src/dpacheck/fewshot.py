"""Few-shot training: a contrastive projection over frozen embeddings, then
a standard classification head.

Training runs in two phases. Phase 1 builds same-class and different-class
example pairs and fits a linear projection (matrix plus bias, initialized to
the identity) by gradient descent on the squared difference between each
projected pair's cosine similarity and its target (1 for same class, 0 for
different). Phase 2 fits the usual logistic-regression head on the projected
vectors. The sentence encoder itself stays frozen behind the embedding
provider boundary; only the projection and the head learn.

With the projection left at its identity initialization (zero phase-1
epochs) the whole model reduces exactly — bit for bit — to a plain
logistic-regression head on the raw embeddings, which keeps the two-phase
machinery honest.

Models serialize through the shared container with a ``projection`` /
``projection_bias`` array section next to the head's ``weights`` and
``bias``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers.base import (
    SCORERS,
    ClassifierModel,
    FeatureMatrix,
    Hyperparameters,
    require_all_classes,
)
from .classifiers.linear import fit_linear
from .errors import DivergenceError, ValidationError

DEFAULT_PAIRS_PER_EXAMPLE = 2


@dataclass(frozen=True)
class ContrastivePair:
    """Indices of two labeled examples and their similarity target."""

    a: int
    b: int
    target: float

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValidationError("a contrastive pair needs two distinct examples")
        if self.target not in (0.0, 1.0):
            raise ValidationError(
                f"pair target must be 1.0 (same class) or 0.0, got {self.target}"
            )


@dataclass(frozen=True)
class PairSet:
    """Generated pairs plus a record of every shortfall against the quota."""

    pairs: tuple[ContrastivePair, ...]
    shortfalls: tuple[str, ...]


def generate_pairs(labels, pairs_per_example: int = DEFAULT_PAIRS_PER_EXAMPLE,
                   seed: int = 0) -> PairSet:
    """Draw per-example contrastive pairs.

    Every example contributes up to ``pairs_per_example`` same-class pairs
    and the same number of different-class pairs, each drawn without
    duplicates from its own seeded stream (so results are independent of
    processing order). Examples with too few partners in either category
    produce fewer pairs and a shortfall record.
    """
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1 or y.size == 0:
        raise ValidationError("labels must be a non-empty 1-D sequence")
    if pairs_per_example < 1:
        raise ValidationError("pairs_per_example must be at least 1")
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ValidationError(
            "contrastive pairs need at least two classes; got one"
        )
    if int(counts.max()) < 2:
        raise ValidationError(
            "contrastive pairs need at least one class with two examples"
        )
    members = {int(c): np.flatnonzero(y == c) for c in classes}
    pairs: list[ContrastivePair] = []
    shortfalls: list[str] = []
    for i in range(y.size):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed, i]))
        )
        same = members[int(y[i])]
        same = same[same != i]
        diff = np.flatnonzero(y != y[i])
        for candidates, target, kind in (
            (same, 1.0, "same-class"),
            (diff, 0.0, "different-class"),
        ):
            take = min(pairs_per_example, candidates.size)
            if take < pairs_per_example:
                shortfalls.append(
                    f"example {i} (class {int(y[i])}): only {candidates.size} "
                    f"{kind} partner(s) for quota {pairs_per_example}"
                )
            if take == 0:
                continue
            chosen = rng.choice(candidates, size=take, replace=False)
            pairs.extend(
                ContrastivePair(i, int(j), target) for j in sorted(chosen)
            )
    return PairSet(tuple(pairs), tuple(shortfalls))


@dataclass(frozen=True)
class Projection:
    """Linear map applied to embeddings before the head: x -> Mx + c."""

    matrix: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError("projection matrix must be square")
        if bias.shape != (matrix.shape[0],):
            raise ValidationError("projection bias must match the matrix dim")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "bias", bias)

    @classmethod
    def identity(cls, dim: int) -> "Projection":
        return cls(np.eye(dim), np.zeros(dim))

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X @ self.matrix.T + self.bias


def projection_loss_and_grad(matrix: np.ndarray, bias: np.ndarray,
                             X: np.ndarray, pairs) -> tuple:
    """Sum of squared (cosine - target) over pairs, with its gradient.

    Pairs whose projected vectors have zero length contribute the target's
    square (cosine treated as 0) and no gradient.
    """
    projected = X @ matrix.T + bias
    loss = 0.0
    d_matrix = np.zeros_like(matrix)
    d_bias = np.zeros_like(bias)
    for pair in pairs:
        u = projected[pair.a]
        v = projected[pair.b]
        nu = float(np.linalg.norm(u))
        nv = float(np.linalg.norm(v))
        if nu == 0.0 or nv == 0.0:
            loss += pair.target**2
            continue
        cos = float(u @ v) / (nu * nv)
        err = cos - pair.target
        loss += err * err
        d_cos_u = v / (nu * nv) - cos * u / (nu * nu)
        d_cos_v = u / (nu * nv) - cos * v / (nv * nv)
        du = 2.0 * err * d_cos_u
        dv = 2.0 * err * d_cos_v
        d_matrix += np.outer(du, X[pair.a]) + np.outer(dv, X[pair.b])
        d_bias += du + dv
    return loss, d_matrix, d_bias


@dataclass(frozen=True)
class TrainedProjection:
    projection: Projection
    epochs_run: int
    final_loss: float


def train_projection(pairs, X: np.ndarray, epochs: int, learning_rate: float,
                     seed: int = 0) -> TrainedProjection:
    """Fit the projection by full-batch gradient descent from the identity.

    With ``epochs=0`` the identity map comes back untouched, so projected
    vectors equal the inputs exactly. The run is deterministic: full-batch
    steps leave nothing for the seed to vary.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("X must be a non-empty (n, dim) matrix")
    if epochs < 0:
        raise ValidationError("epochs must be non-negative")
    if learning_rate <= 0:
        raise ValidationError("learning rate must be positive")
    pairs = tuple(pairs)
    for pair in pairs:
        if not (0 <= pair.a < X.shape[0] and 0 <= pair.b < X.shape[0]):
            raise ValidationError(
                f"pair ({pair.a}, {pair.b}) is out of range for {X.shape[0]} "
                "examples"
            )
    dim = X.shape[1]
    matrix = np.eye(dim)
    bias = np.zeros(dim)
    loss, _, _ = projection_loss_and_grad(matrix, bias, X, pairs)
    for epoch in range(epochs):
        loss, d_matrix, d_bias = projection_loss_and_grad(matrix, bias, X, pairs)
        if not np.isfinite(loss):
            raise DivergenceError(epoch, loss)
        matrix = matrix - learning_rate * d_matrix
        bias = bias - learning_rate * d_bias
    if pairs and epochs:
        loss, _, _ = projection_loss_and_grad(matrix, bias, X, pairs)
        if not np.isfinite(loss):
            raise DivergenceError(epochs, loss)
    return TrainedProjection(Projection(matrix, bias), epochs, float(loss))


def sample_shots(data: FeatureMatrix, *, fraction: float | None = None,
                 per_class: int | None = None, seed: int = 0
                 ) -> tuple[FeatureMatrix, str]:
    """Per-class subsample for the few-shot regime.

    Exactly one of ``fraction`` (of each class) or ``per_class`` (shot count
    per class) must be given. Returns the subsample, in original order, and
    a source tag for the model metadata ("30%" or "10/class").
    """
    if (fraction is None) == (per_class is None):
        raise ValidationError("give exactly one of fraction or per_class")
    if fraction is not None and not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    if per_class is not None and per_class < 1:
        raise ValidationError("per_class must be at least 1")
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    chosen: list[int] = []
    for cls in range(data.task.n_classes):
        indices = np.flatnonzero(data.y == cls)
        if indices.size == 0:
            continue
        if fraction is not None:
            take = min(indices.size, max(1, int(indices.size * fraction + 0.5)))
        else:
            take = min(indices.size, per_class)
        chosen.extend(int(i) for i in rng.choice(indices, size=take,
                                                 replace=False))
    chosen.sort()
    source = (
        f"{fraction:.0%}" if fraction is not None else f"{per_class}/class"
    )
    subset = FeatureMatrix(data.X[chosen], data.y[chosen], data.task)
    return subset, source


def fit_fewshot(data: FeatureMatrix, hp: Hyperparameters, seed: int, *,
                pairs_per_example: int = DEFAULT_PAIRS_PER_EXAMPLE,
                projection_epochs: int | None = None,
                projection_lr: float | None = None,
                shots_source: str = "all") -> ClassifierModel:
    """Two-phase fit: contrastive projection, then a logistic head.

    The projection's epoch count and learning rate default to the head's
    hyperparameters; pass ``projection_epochs=0`` to skip phase 1 entirely,
    which makes the result identical to a plain head on raw embeddings.
    """
    require_all_classes(data.class_counts(), data.task)
    if projection_epochs is None:
        projection_epochs = hp.epochs
    if projection_lr is None:
        projection_lr = hp.learning_rate
    pair_set = generate_pairs(data.y, pairs_per_example, seed)
    trained = train_projection(
        pair_set.pairs, data.X, projection_epochs, projection_lr, seed
    )
    projected = trained.projection.apply(data.X)
    head = fit_linear(
        "logreg", FeatureMatrix(projected, data.y, data.task), hp, seed
    )
    arrays = {
        "projection": trained.projection.matrix,
        "projection_bias": trained.projection.bias,
        "weights": head.arrays["weights"],
        "bias": head.arrays["bias"],
    }
    meta = dict(head.training_meta)
    meta.update(
        {
            "head": "logreg",
            "pairs": len(pair_set.pairs),
            "pairs_per_example": pairs_per_example,
            "pair_shortfalls": len(pair_set.shortfalls),
            "projection_epochs": trained.epochs_run,
            "projection_final_loss": trained.final_loss,
            "shots_source": shots_source,
        }
    )
    return ClassifierModel(
        algorithm="fewshot",
        task=data.task,
        hyperparameters=hp,
        seed=seed,
        arrays=arrays,
        training_meta=meta,
    )


def projection_of(model: ClassifierModel) -> Projection:
    if model.algorithm != "fewshot":
        raise ValidationError(
            f"expected a fewshot model, got {model.algorithm!r}"
        )
    return Projection(model.arrays["projection"], model.arrays["projection_bias"])


def _head_scores(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    from .classifiers.base import sigmoid, softmax

    weights = model.arrays["weights"]
    bias = model.arrays["bias"]
    if model.task.mode == "binary":
        p = sigmoid(X @ weights[0] + bias[0])
        return np.stack([p, 1.0 - p], axis=1)
    return softmax(X @ weights.T + bias)


def _fewshot_scores(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    return _head_scores(model, projection_of(model).apply(X))


SCORERS["fewshot"] = _fewshot_scores
