"""Shared classifier types: tasks, hyperparameters, the model container.

Model container layout (little-endian): magic ``DPAM``, u16 version, u32
header length, UTF-8 JSON header (sorted keys, compact separators), then the
raw parameter arrays in the header's manifest order. Deterministic training
plus this layout gives byte-identical model files across runs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..errors import ParseError, ValidationError

OTHER_LABEL = "other"

ALGORITHMS = ("logreg", "linear_svm", "random_forest", "mlp", "bilstm")

# Search space used by grid_search unless the caller narrows it.
DEFAULT_GRID = {
    "batch_size": (32, 64, 128),
    "epochs": (25, 50, 100),
    "learning_rate": (0.01, 0.0001),
}

# Reserved search space for fine-tuning a transformer encoder end to end.
# No trainer in this package consumes it; it is published so downstream
# fine-tuning workflows share one definition of the sweep.
ENCODER_FINETUNE_GRID = {
    "batch_size": (32, 64, 128),
    "epochs": (10, 20),
    "learning_rate": (2e-05, 3e-05, 4e-05, 5e-05),
}


@dataclass(frozen=True)
class TaskSpec:
    """Classification task: one provision vs the rest, or all provisions.

    Binary classes are ``(provision, "other")`` with the positive class at
    index 0; multiclass classes are the catalog order plus a trailing
    ``"other"``.
    """

    mode: str
    classes: tuple[str, ...]
    provision: str | None = None

    def __post_init__(self):
        if self.mode == "binary":
            if len(self.classes) != 2:
                raise ValidationError("binary task needs exactly 2 classes")
            if self.provision != self.classes[0]:
                raise ValidationError("binary positive class must be the provision")
        elif self.mode == "multiclass":
            if len(self.classes) < 2 or self.classes[-1] != OTHER_LABEL:
                raise ValidationError(
                    f"multiclass classes must end with {OTHER_LABEL!r}"
                )
            if self.provision is not None:
                raise ValidationError("multiclass task takes no provision")
        else:
            raise ValidationError(f"unknown task mode {self.mode!r}")
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("duplicate class labels")

    @classmethod
    def binary(cls, provision: str) -> "TaskSpec":
        return cls("binary", (provision, OTHER_LABEL), provision)

    @classmethod
    def multiclass(cls, provision_ids) -> "TaskSpec":
        return cls("multiclass", tuple(provision_ids) + (OTHER_LABEL,))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def provision_indices(self) -> list[int]:
        """Class indices that denote provisions (everything but 'other')."""
        if self.mode == "binary":
            return [0]
        return list(range(len(self.classes) - 1))

    def to_dict(self) -> dict:
        return {"mode": self.mode, "classes": list(self.classes), "provision": self.provision}

    @classmethod
    def from_dict(cls, raw: dict) -> "TaskSpec":
        return cls(raw["mode"], tuple(raw["classes"]), raw.get("provision"))


@dataclass(frozen=True)
class Hyperparameters:
    batch_size: int = 32
    epochs: int = 50
    learning_rate: float = 0.01
    dropout: float = 0.3
    l2: float = 1e-3
    n_trees: int = 50
    max_depth: int = 8
    min_leaf: int = 1
    hidden_sizes: tuple[int, ...] = (64,)
    lstm_hidden: int = 32

    def __post_init__(self):
        for name in ("batch_size", "epochs", "n_trees", "min_leaf", "lstm_hidden"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must be in [0, 1)")
        if self.l2 < 0:
            raise ValidationError("l2 must be non-negative")
        if self.max_depth < 0:
            raise ValidationError("max_depth must be >= 0")
        if isinstance(self.hidden_sizes, list):
            object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ValidationError("hidden sizes must be >= 1")

    def replace(self, **overrides) -> "Hyperparameters":
        merged = asdict(self)
        merged.update(overrides)
        return Hyperparameters(**merged)


def hyperparameter_names() -> list[str]:
    return [f.name for f in fields(Hyperparameters)]


@dataclass
class FeatureMatrix:
    """Embedding rows plus class-index labels for one task."""

    X: np.ndarray
    y: np.ndarray
    task: TaskSpec

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise ValidationError(
                f"{self.X.shape[0]} rows but {self.y.shape[0]} labels"
            )
        if not np.all(np.isfinite(self.X)):
            raise ValidationError("features contain non-finite values")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.task.n_classes):
            raise ValidationError("label outside the task's class range")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.task.n_classes)


@dataclass
class SequenceData:
    """Per-sentence token-vector sequences for recurrent models."""

    sequences: list[np.ndarray]
    y: np.ndarray
    task: TaskSpec

    def __post_init__(self):
        self.sequences = [np.asarray(s, dtype=np.float64) for s in self.sequences]
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.sequences) != len(self.y):
            raise ValidationError("sequence count does not match label count")
        dims = {s.shape[1] for s in self.sequences if s.ndim == 2}
        if any(s.ndim != 2 or s.shape[0] < 1 for s in self.sequences):
            raise ValidationError("every sequence must be (seq_len>=1, dim)")
        if len(dims) > 1:
            raise ValidationError(f"mixed sequence dims {sorted(dims)}")

    @property
    def n(self) -> int:
        return len(self.sequences)

    @property
    def dim(self) -> int:
        return self.sequences[0].shape[1] if self.sequences else 0


def require_all_classes(counts: np.ndarray, task: TaskSpec) -> None:
    missing = [task.classes[i] for i in range(task.n_classes) if counts[i] == 0]
    if missing:
        raise ValidationError(f"no training examples for classes {missing}")


MODEL_MAGIC = b"DPAM"
MODEL_VERSION = 1


@dataclass
class ClassifierModel:
    algorithm: str
    task: TaskSpec
    hyperparameters: Hyperparameters
    seed: int
    arrays: dict[str, np.ndarray]
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS and self.algorithm != "fewshot":
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")

    def save(self, path: str) -> None:
        names = sorted(self.arrays)
        manifest = []
        payloads = []
        for name in names:
            arr = np.ascontiguousarray(self.arrays[name])
            le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
            manifest.append(
                {"name": name, "dtype": le.dtype.str, "shape": list(arr.shape)}
            )
            payloads.append(le.tobytes())
        header = {
            "algorithm": self.algorithm,
            "task": self.task.to_dict(),
            "hyperparameters": asdict(self.hyperparameters),
            "seed": self.seed,
            "training_meta": self.training_meta,
            "arrays": manifest,
        }
        raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<HI", MODEL_VERSION, len(raw)))
            fh.write(raw)
            for blob in payloads:
                fh.write(blob)

    @classmethod
    def load(cls, path: str) -> "ClassifierModel":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != MODEL_MAGIC:
            raise ParseError(f"bad model magic {data[:4]!r}", path=path)
        version, header_len = struct.unpack("<HI", data[4:10])
        if version != MODEL_VERSION:
            raise ParseError(f"unsupported model version {version}", path=path)
        try:
            header = json.loads(data[10 : 10 + header_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad model header: {exc}", path=path) from exc
        offset = 10 + header_len
        arrays = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
            blob = data[offset : offset + nbytes]
            if len(blob) != nbytes:
                raise ParseError(
                    f"truncated payload for array {entry['name']!r}", path=path
                )
            arrays[entry["name"]] = (
                np.frombuffer(blob, dtype=dtype).reshape(shape).copy()
            )
            offset += nbytes
        if offset != len(data):
            raise ParseError(f"{len(data) - offset} trailing bytes", path=path)
        hp = dict(header["hyperparameters"])
        hp["hidden_sizes"] = tuple(hp.get("hidden_sizes", ()))
        return cls(
            algorithm=header["algorithm"],
            task=TaskSpec.from_dict(header["task"]),
            hyperparameters=Hyperparameters(**hp),
            seed=int(header["seed"]),
            arrays=arrays,
            training_meta=header.get("training_meta", {}),
        )


# algorithm name -> scores(model, X) over a 2-D batch (or sequence list).
SCORERS: dict = {}


def predict_scores(model: ClassifierModel, features):
    """Per-class scores for one feature vector/sequence or a batch of them.

    Probabilistic heads return rows summing to 1; the svm returns margins.
    A single input yields a 1-D score row.
    """
    scorer = SCORERS.get(model.algorithm)
    if scorer is None and model.algorithm == "fewshot":
        import dpacheck.fewshot  # noqa: F401  (registers its scorer)

        scorer = SCORERS.get(model.algorithm)
    if scorer is None:
        raise ValidationError(f"no scorer registered for {model.algorithm!r}")
    if model.algorithm == "bilstm":
        single = isinstance(features, np.ndarray) and features.ndim == 2
        batch = [features] if single else list(features)
        scores = scorer(model, batch)
    else:
        arr = np.asarray(features, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != model_dim(model):
            raise ValidationError(
                f"feature dim {arr.shape[-1]} does not match model dim "
                f"{model_dim(model)}"
            )
        scores = scorer(model, arr)
    return scores[0] if single else scores


def model_dim(model: ClassifierModel) -> int:
    """Input dimensionality the model was trained on."""
    meta_dim = model.training_meta.get("dim")
    if meta_dim is None:
        raise ValidationError("model is missing its input dim")
    return int(meta_dim)


def predicted_class(model: ClassifierModel, scores: np.ndarray, threshold: float | None = None) -> int:
    """Decision rule over one score row.

    Binary: positive iff the positive score exceeds the threshold (default
    0.5 for probabilistic heads, 0 margin for the svm). Multiclass: argmax
    with ties going to the lowest class index.
    """
    scores = np.asarray(scores)
    if model.task.mode == "binary":
        if threshold is None:
            threshold = 0.0 if model.algorithm == "linear_svm" else 0.5
        return 0 if scores[0] > threshold else 1
    return int(np.argmax(scores))


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    """Seeded epoch iterator over index batches."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
