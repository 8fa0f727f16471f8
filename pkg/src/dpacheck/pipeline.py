"""End-to-end assembly: sentences + embedding store → models → reports.

This module wires the pieces together without adding new behavior:
features are store lookups, training defers to the classifier
implementations, and checking defers to the checker.  Two predictor shapes
are supported
everywhere: a single multiclass :class:`ClassifierModel`, or a mapping
``provision id → binary model`` (a "suite"), which allows multi-label
sentences.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dpacheck.balance import label_for
from dpacheck.checker import (
    CompletenessReport,
    SentencePrediction,
    check_dpa,
    digest_file,
)
from dpacheck.classifiers import (
    ALGORITHMS,
    OTHER_LABEL,
    ClassifierModel,
    FeatureMatrix,
    Hyperparameters,
    SequenceData,
    TaskSpec,
    fit_model,
    predict_scores,
    predicted_class,
)
from dpacheck.corpus import LabeledCorpus, ProvisionCatalog, Sentence
from dpacheck.embedding import EmbeddingNotFoundError, EmbeddingStore
from dpacheck.errors import ParseError, ValidationError
from dpacheck.eval import (
    MetricsSummary,
    ProvisionConfusion,
    compute_metrics,
    dpa_confusion,
)
from dpacheck.preprocess import AliasTable, normalize, split_sentences

SUITE_MANIFEST = "suite.json"
SUITE_FORMAT = "dpacheck-suite"
SUITE_VERSION = 1


def _lookup(store: EmbeddingStore, text: str, aliases: AliasTable | None):
    """Sentence vector with a normalized-text fallback.

    Stores are usually built over normalized sentences; raw documents may
    still contain party names, so a miss retries after alias replacement.
    """
    try:
        return store.vector_for_text(text)
    except EmbeddingNotFoundError:
        if aliases is None:
            raise
        return store.vector_for_text(normalize(text, aliases).text)


def feature_matrix(
    sentences: Sequence[Sentence],
    store: EmbeddingStore,
    task: TaskSpec,
    aliases: AliasTable | None = None,
) -> FeatureMatrix:
    """One embedding row per sentence, labels mapped through the task."""
    if not sentences:
        raise ValidationError("cannot build features from zero sentences")
    X = np.stack([_lookup(store, s.text, aliases) for s in sentences])
    y = np.array([task.classes.index(label_for(s, task)) for s in sentences])
    return FeatureMatrix(X, y, task)


def sequence_data(
    sentences: Sequence[Sentence],
    store: EmbeddingStore,
    task: TaskSpec,
    aliases: AliasTable | None = None,
) -> SequenceData:
    """Token sequences per sentence; stores without a token section fall
    back to a length-1 sequence of the sentence vector."""
    if not sentences:
        raise ValidationError("cannot build sequences from zero sentences")
    seqs = []
    for s in sentences:
        if store.has_tokens:
            seqs.append(store.tokens_for_text(s.text))
        else:
            seqs.append(_lookup(store, s.text, aliases)[None, :])
    y = np.array([task.classes.index(label_for(s, task)) for s in sentences])
    return SequenceData(seqs, y, task)


def features_for(
    algorithm: str,
    sentences: Sequence[Sentence],
    store: EmbeddingStore,
    task: TaskSpec,
    aliases: AliasTable | None = None,
):
    if algorithm == "bilstm":
        return sequence_data(sentences, store, task, aliases)
    return feature_matrix(sentences, store, task, aliases)


def corpus_sentences(corpus: LabeledCorpus) -> list[Sentence]:
    return [s for dpa_id in corpus.dpa_ids for s in corpus.dpas[dpa_id]]


def fit_on_corpus(
    algorithm: str,
    corpus: LabeledCorpus,
    store: EmbeddingStore,
    task: TaskSpec,
    hp: Hyperparameters,
    seed: int,
) -> ClassifierModel:
    """Train one model of the given algorithm over a whole corpus."""
    data = features_for(algorithm, corpus_sentences(corpus), store, task)
    return fit_model(algorithm, data, hp, seed)


def fit_binary_suite(
    corpus: LabeledCorpus,
    store: EmbeddingStore,
    algorithm: str,
    hp: Hyperparameters,
    seed: int,
) -> dict[str, ClassifierModel]:
    """One one-vs-rest model per catalog provision, in catalog order."""
    sentences = corpus_sentences(corpus)
    suite = {}
    for pid in corpus.catalog.ids:
        task = TaskSpec.binary(pid)
        data = features_for(algorithm, sentences, store, task)
        suite[pid] = fit_model(algorithm, data, hp, seed)
    return suite


def save_suite(suite: Mapping[str, ClassifierModel], directory: str | Path) -> Path:
    """Write every model plus a digest manifest; returns the manifest path."""
    if not suite:
        raise ValidationError("cannot save an empty suite")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    models = []
    algorithms = set()
    for pid, model in suite.items():
        if model.task.mode != "binary" or model.task.provision != pid:
            raise ValidationError(
                f"suite entry {pid!r} does not hold that provision's binary model"
            )
        filename = f"{pid}.dpam"
        model.save(str(directory / filename))
        models.append(
            {"id": pid, "file": filename, "digest": digest_file(directory / filename)}
        )
        algorithms.add(model.algorithm)
    manifest = {
        "format": SUITE_FORMAT,
        "version": SUITE_VERSION,
        "algorithms": sorted(algorithms),
        "models": models,
    }
    path = directory / SUITE_MANIFEST
    path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def load_suite(directory: str | Path) -> dict[str, ClassifierModel]:
    """Load a suite, verifying the manifest digests."""
    directory = Path(directory)
    path = directory / SUITE_MANIFEST
    if not path.exists():
        raise ParseError(f"no {SUITE_MANIFEST} in {directory}", path=str(path))
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid suite manifest: {exc}", path=str(path)) from exc
    if manifest.get("format") != SUITE_FORMAT:
        raise ParseError("not a model-suite manifest", path=str(path))
    suite = {}
    for entry in manifest.get("models", []):
        model_path = directory / entry["file"]
        actual = digest_file(model_path)
        if actual != entry["digest"]:
            raise ValidationError(
                f"model file {entry['file']} digest mismatch: manifest says "
                f"{entry['digest']}, file is {actual}"
            )
        suite[entry["id"]] = ClassifierModel.load(str(model_path))
    if not suite:
        raise ValidationError(f"suite manifest {path} lists no models")
    return suite


Predictor = ClassifierModel | Mapping[str, ClassifierModel]


def _validate_predictor(predictor: Predictor) -> None:
    if isinstance(predictor, ClassifierModel):
        if predictor.task.mode != "multiclass":
            raise ValidationError(
                "a single model predictor must be multiclass; wrap binary "
                "models in a {provision: model} suite"
            )
        return
    if not predictor:
        raise ValidationError("empty predictor suite")
    for pid, model in predictor.items():
        if model.task.mode != "binary" or model.task.provision != pid:
            raise ValidationError(
                f"suite entry {pid!r} must be the binary model for that provision"
            )


def predict_sentences(
    predictor: Predictor,
    sentences: Sequence[Sentence],
    store: EmbeddingStore,
    *,
    aliases: AliasTable | None = None,
    threshold: float | None = None,
) -> list[SentencePrediction]:
    """Per-sentence provision labels under either predictor shape.

    A multiclass model assigns at most one provision per sentence (its
    argmax class unless that is 'other'); a binary suite may assign several.
    """
    _validate_predictor(predictor)
    if not sentences:
        return []

    labels: list[dict[str, float]] = [{} for _ in sentences]
    if isinstance(predictor, ClassifierModel):
        feats = features_for(
            predictor.algorithm, sentences, store, predictor.task, aliases
        )
        raw = feats.sequences if isinstance(feats, SequenceData) else feats.X
        scores = np.atleast_2d(predict_scores(predictor, raw))
        for i, row in enumerate(scores):
            ci = predicted_class(predictor, row, threshold)
            label = predictor.task.classes[ci]
            if label != OTHER_LABEL:
                labels[i][label] = float(row[ci])
    else:
        for pid, model in predictor.items():
            feats = features_for(model.algorithm, sentences, store, model.task, aliases)
            raw = feats.sequences if isinstance(feats, SequenceData) else feats.X
            scores = np.atleast_2d(predict_scores(model, raw))
            for i, row in enumerate(scores):
                if predicted_class(model, row, threshold) == 0:
                    labels[i][pid] = float(row[0])

    return [
        SentencePrediction(
            dpa_id=s.dpa_id,
            sentence_index=s.sentence_index,
            text=s.text,
            predicted_labels=frozenset(found),
            scores=found,
        )
        for s, found in zip(sentences, labels)
    ]


@dataclass
class EvaluationResult:
    """DPA-level metrics plus the satisfied-sets they were computed from."""

    metrics: MetricsSummary
    confusion: ProvisionConfusion
    gold: dict[str, frozenset[str]]
    predicted: dict[str, frozenset[str]]
    n_sentences: int
    sentence_agreement: float


def evaluate_predictions(
    predictions: Sequence[SentencePrediction],
    corpus: LabeledCorpus,
    beta: float = 2.0,
) -> EvaluationResult:
    """Score predictions against a labeled corpus at the DPA level.

    ``sentence_agreement`` is the fraction of sentences whose predicted
    label set equals the gold label set exactly (a multiclass model can
    therefore never agree on a multi-label sentence).
    """
    by_key = {(p.dpa_id, p.sentence_index): p for p in predictions}
    sentences = corpus_sentences(corpus)
    missing = [s for s in sentences if (s.dpa_id, s.sentence_index) not in by_key]
    if missing:
        s = missing[0]
        raise ValidationError(
            f"no prediction for sentence {s.dpa_id}#{s.sentence_index} "
            f"({len(missing)} missing in total)"
        )

    agree = sum(
        1
        for s in sentences
        if by_key[(s.dpa_id, s.sentence_index)].predicted_labels == s.gold_labels
    )
    gold = {d: frozenset(corpus.gold_satisfied(d)) for d in corpus.dpa_ids}
    predicted: dict[str, set[str]] = {d: set() for d in corpus.dpa_ids}
    for p in predictions:
        if p.dpa_id in predicted:
            predicted[p.dpa_id].update(p.predicted_labels)
    predicted_frozen = {d: frozenset(v) for d, v in predicted.items()}

    confusion = dpa_confusion(gold, predicted_frozen, corpus.catalog)
    return EvaluationResult(
        metrics=compute_metrics(confusion, beta),
        confusion=confusion,
        gold=gold,
        predicted=predicted_frozen,
        n_sentences=len(sentences),
        sentence_agreement=agree / len(sentences) if sentences else 0.0,
    )


def evaluate_model(
    predictor: Predictor,
    corpus: LabeledCorpus,
    store: EmbeddingStore,
    *,
    beta: float = 2.0,
    threshold: float | None = None,
) -> EvaluationResult:
    predictions = predict_sentences(
        predictor, corpus_sentences(corpus), store, threshold=threshold
    )
    return evaluate_predictions(predictions, corpus, beta)


def check_document(
    text: str,
    predictor: Predictor,
    store: EmbeddingStore,
    catalog: ProvisionCatalog,
    *,
    dpa_id: str = "document",
    aliases: AliasTable | None = None,
    confidence_floor: float = 0.0,
    threshold: float | None = None,
    model_digest: str = "",
) -> tuple[CompletenessReport, list[SentencePrediction]]:
    """User-perspective path: raw text → sentences → verdicts."""
    segments = split_sentences(text)
    if not segments:
        raise ValidationError("document contains no sentences")
    sentences = [
        Sentence(dpa_id=dpa_id, sentence_index=i, text=seg)
        for i, seg in enumerate(segments)
    ]
    predictions = predict_sentences(
        predictor, sentences, store, aliases=aliases, threshold=threshold
    )
    report = check_dpa(
        predictions,
        catalog,
        dpa_id=dpa_id,
        confidence_floor=confidence_floor,
        model_digest=model_digest,
    )
    return report, predictions


def algorithm_choices() -> tuple[str, ...]:
    return ALGORITHMS
