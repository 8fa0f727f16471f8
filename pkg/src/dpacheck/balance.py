"""Class-imbalance handling and data augmentation for training sets.

Three resampling operations work on labeled datasets: undersampling the
"other" class down to the largest provision-class count, oversampling every
smaller class up to the majority count, and the two-step combination that
leaves all classes at the largest provision-class count. Four augmentation
families generate paraphrased or perturbed copies of positive sentences:

* back-translation (``BT``) — round trip through pivot languages via a
  pluggable translation client (an identity stub ships for offline use);
* synonym replacement (``SR``) — one variant per synonym lexicon, replacing
  up to two content words per sentence;
* embedding replacement (``ER``) — replace a content word with its nearest
  neighbour in an embedding store's word-vector section;
* noise injection (``NI``) — swap, delete, substitute, and crop operations
  on the whitespace token sequence.

Augmented examples always inherit the gold labels of their source sentence.
Every random choice is drawn from a stream derived from ``(seed, content
hash of the sentence, operation name)``, so results do not depend on corpus
order and are reproducible byte for byte.

``build_variant`` applies a :class:`VariantRecipe` — an ordered list of
resample/augment steps — and returns the new dataset together with a
manifest recording the recipe, seed, per-step accounting, and resulting
class counts. :data:`BUILTIN_RECIPES` holds the thirteen standard recipes:
the three resampling modes, each augmentation family alone, each family
followed by two-step rebalancing, and the all-families combination with and
without rebalancing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .classifiers.base import OTHER_LABEL, TaskSpec
from .corpus import Sentence
from .embedding import EmbeddingStore, fnv1a64
from .errors import (
    CapabilityError,
    ExternalServiceError,
    ParseError,
    ValidationError,
)
from .preprocess import tokenize

DEFAULT_PIVOTS = ("fr", "de")
NOISE_OPS = ("swap", "delete", "substitute", "crop")
METHODS = ("BT", "SR", "ER", "NI-swap", "NI-delete", "NI-substitute", "NI-crop")
ORIGINAL_METHOD = "original"
MT_ENDPOINT_ENV_VAR = "DPACHECK_MT_ENDPOINT"

_MASK63 = (1 << 63) - 1


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The bundled English stopword list, lowercased."""
    text = (
        importlib_resources.files("dpacheck")
        .joinpath("data/stopwords_en.txt")
        .read_text(encoding="utf-8")
    )
    return frozenset(
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


def is_content_word(word: str) -> bool:
    """Alphabetic and not a stopword."""
    return word.isalpha() and word.lower() not in stopwords()


def sentence_rng(seed: int, text: str, op: str) -> np.random.Generator:
    """Random stream for one (sentence, operation) pair.

    Derived from the content hash rather than the sentence's position, so
    augmenting sentences in any order or in parallel gives identical output.
    """
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(
        np.random.PCG64(
            np.random.SeedSequence([seed & _MASK63, fnv1a64(text), fnv1a64(op)])
        )
    )


def _op_rng(seed: int, op: str) -> np.random.Generator:
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed & _MASK63, fnv1a64(op)]))
    )


# ---------------------------------------------------------------------------
# Labeled datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Example:
    """One training example: a text with its class label and origin."""

    text: str
    label: str
    sentence: Sentence
    method: str = ORIGINAL_METHOD

    def __post_init__(self) -> None:
        if not self.text:
            raise ValidationError("example text must be non-empty")
        if self.method != ORIGINAL_METHOD and self.method not in METHODS:
            raise ValidationError(f"unknown example method {self.method!r}")


@dataclass(frozen=True)
class Dataset:
    """Labeled examples under one task's class vocabulary."""

    task: TaskSpec
    examples: tuple[Example, ...]

    def __post_init__(self) -> None:
        valid = set(self.task.classes)
        for example in self.examples:
            if example.label not in valid:
                raise ValidationError(
                    f"example label {example.label!r} is not a class of the task"
                )

    def __len__(self) -> int:
        return len(self.examples)

    def class_counts(self) -> dict[str, int]:
        counts = {cls: 0 for cls in self.task.classes}
        for example in self.examples:
            counts[example.label] += 1
        return counts

    def positives(self) -> tuple[Example, ...]:
        return tuple(e for e in self.examples if e.label != OTHER_LABEL)


def label_for(sentence: Sentence, task: TaskSpec) -> str:
    """Class label of a sentence under a task.

    The first task class (catalog order) present in the sentence's gold
    labels wins; sentences supporting none of them fall to "other".
    """
    for cls in task.classes[:-1]:
        if cls in sentence.gold_labels:
            return cls
    return OTHER_LABEL


def dataset_from_sentences(sentences: Sequence[Sentence], task: TaskSpec) -> Dataset:
    return Dataset(
        task,
        tuple(
            Example(s.text, label_for(s, task), s) for s in sentences
        ),
    )


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def _require_provision_examples(counts: dict[str, int], task: TaskSpec) -> int:
    """Check every provision class is populated; return the largest count."""
    provision_counts = {c: counts[c] for c in task.classes if c != OTHER_LABEL}
    empty = sorted(c for c, n in provision_counts.items() if n == 0)
    if empty:
        raise ValidationError(
            f"cannot balance with empty class(es): {', '.join(empty)}"
        )
    return max(provision_counts.values())


def random_undersample(dataset: Dataset, seed: int) -> Dataset:
    """Shrink "other" down to the largest provision-class count.

    Sampling is without replacement; no provision example is ever dropped.
    An "other" class already at or below the target is left untouched.
    """
    counts = dataset.class_counts()
    target = _require_provision_examples(counts, dataset.task)
    if counts[OTHER_LABEL] <= target:
        return dataset
    rng = _op_rng(seed, "undersample")
    other_positions = [
        i for i, e in enumerate(dataset.examples) if e.label == OTHER_LABEL
    ]
    chosen = rng.choice(len(other_positions), size=target, replace=False)
    kept = {other_positions[int(i)] for i in chosen}
    return Dataset(
        dataset.task,
        tuple(
            e
            for i, e in enumerate(dataset.examples)
            if e.label != OTHER_LABEL or i in kept
        ),
    )


def random_oversample(dataset: Dataset, seed: int) -> Dataset:
    """Duplicate examples of every smaller class up to the majority count.

    Draws are with replacement; all original examples are retained and the
    duplicates are appended in task class order.
    """
    counts = dataset.class_counts()
    majority = max(counts.values())
    rng = _op_rng(seed, "oversample")
    appended: list[Example] = []
    for cls in dataset.task.classes:
        deficit = majority - counts[cls]
        if deficit == 0:
            continue
        members = [e for e in dataset.examples if e.label == cls]
        if not members:
            raise ValidationError(f"cannot oversample empty class {cls!r}")
        draws = rng.integers(0, len(members), size=deficit)
        appended.extend(members[int(d)] for d in draws)
    if not appended:
        return dataset
    return Dataset(dataset.task, dataset.examples + tuple(appended))


def under_oversample(dataset: Dataset, seed: int) -> Dataset:
    """Two-step rebalancing: undersample "other", then oversample the rest.

    Afterwards every class sits at the largest provision-class count.
    """
    if dataset.task.mode != "multiclass":
        raise ValidationError(
            "two-step balancing expects a multiclass dataset; for binary "
            "tasks apply undersampling and oversampling as separate steps"
        )
    return random_oversample(random_undersample(dataset, seed), seed)


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentedSentence:
    """A generated copy of a positive sentence.

    The gold labels of the base sentence carry over verbatim. ``identity``
    marks the rare variants whose text equals the source (full-window crops,
    identity translation stubs); any other equal-text variant is invalid.
    """

    base: Sentence
    text: str
    method: str
    params: tuple
    identity: bool = False

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValidationError(f"unknown augmentation method {self.method!r}")
        if not self.text:
            raise ValidationError("augmented text must be non-empty")
        if self.text == self.base.text and not self.identity:
            raise ValidationError(
                "augmented text equals the source but is not flagged identity"
            )

    @property
    def gold_labels(self) -> frozenset[str]:
        return self.base.gold_labels


@dataclass
class AugmentationResult:
    """Variants plus accounting for everything that did not become one."""

    variants: list[AugmentedSentence] = field(default_factory=list)
    dropped: int = 0
    skipped: int = 0
    identities: int = 0
    errors: list[str] = field(default_factory=list)

    def add(self, variant: AugmentedSentence) -> None:
        self.variants.append(variant)
        if variant.identity:
            self.identities += 1


def _splice(text: str, replacements: list[tuple[int, int, str]]) -> str:
    """Replace ``(start, end, new)`` spans, applied right to left."""
    for start, end, new in sorted(replacements, reverse=True):
        text = text[:start] + new + text[end:]
    return text


def _match_case(replacement: str, original: str) -> str:
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


@dataclass(frozen=True)
class SynonymLexicon:
    """Word-to-synonyms map from one source resource.

    Entries mapping a word only to itself are rejected; self-synonyms are
    stripped so a drawn replacement always differs from the source word.
    """

    source_name: str
    entries: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        if not self.source_name:
            raise ValidationError("lexicon source name must be non-empty")
        cleaned: dict[str, tuple[str, ...]] = {}
        for word, synonyms in self.entries.items():
            if not synonyms:
                raise ValidationError(
                    f"lexicon {self.source_name}: {word!r} has no synonyms"
                )
            kept = tuple(s for s in synonyms if s and s != word)
            if not kept:
                raise ValidationError(
                    f"lexicon {self.source_name}: {word!r} maps only to itself"
                )
            cleaned[word.lower()] = kept
        object.__setattr__(self, "entries", cleaned)

    @classmethod
    def from_file(cls, path: str | Path) -> "SynonymLexicon":
        """Load a TAB-separated lexicon: ``word<TAB>synonym,synonym,...``."""
        path = Path(path)
        entries: dict[str, tuple[str, ...]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "\t" not in line:
                    raise ParseError(
                        "expected 'word<TAB>synonym,synonym,...'",
                        path=str(path),
                        line=lineno,
                    )
                word, _, tail = line.partition("\t")
                word = word.strip().lower()
                synonyms = tuple(
                    s.strip() for s in tail.split(",") if s.strip()
                )
                if not word or not synonyms:
                    raise ParseError(
                        "lexicon entry needs a word and at least one synonym",
                        path=str(path),
                        line=lineno,
                    )
                if word in entries:
                    raise ParseError(
                        f"duplicate lexicon entry {word!r}",
                        path=str(path),
                        line=lineno,
                    )
                entries[word] = synonyms
        if not entries:
            raise ParseError("lexicon file has no entries", path=str(path))
        return cls(source_name=path.stem, entries=entries)


def augment_synonym(
    positives: Sequence[Sentence],
    lexicons: Sequence[SynonymLexicon],
    seed: int,
    max_replacements: int = 2,
) -> AugmentationResult:
    """One variant per sentence per lexicon, swapping in drawn synonyms.

    Up to ``max_replacements`` content words with lexicon entries are
    replaced. Sentences offering no replaceable word under a lexicon yield
    no variant there and bump the drop counter.
    """
    if not lexicons:
        raise ValidationError("at least one synonym lexicon is required")
    if max_replacements < 1:
        raise ValidationError("max_replacements must be at least 1")
    result = AugmentationResult()
    for sentence in positives:
        tokens = tokenize(sentence.text)
        for lexicon in lexicons:
            rng = sentence_rng(seed, sentence.text, f"SR:{lexicon.source_name}")
            candidates = [
                token
                for token in tokens
                if is_content_word(token.text)
                and token.text.lower() in lexicon.entries
            ]
            if not candidates:
                result.dropped += 1
                continue
            count = min(max_replacements, len(candidates))
            picks = sorted(
                int(i) for i in rng.choice(len(candidates), size=count, replace=False)
            )
            spans: list[tuple[int, int, str]] = []
            detail: list[tuple[str, str]] = []
            for pick in picks:
                token = candidates[pick]
                synonyms = lexicon.entries[token.text.lower()]
                drawn = synonyms[int(rng.integers(0, len(synonyms)))]
                replacement = _match_case(drawn, token.text)
                spans.append((token.start, token.end, replacement))
                detail.append((token.text, replacement))
            text = _splice(sentence.text, spans)
            result.add(
                AugmentedSentence(
                    base=sentence,
                    text=text,
                    method="SR",
                    params=(lexicon.source_name, tuple(detail)),
                    identity=text == sentence.text,
                )
            )
    return result


class _VocabIndex:
    """Nearest-neighbour lookup over a store's word-vector section."""

    def __init__(self, vocab: dict[str, np.ndarray]):
        self.words = sorted(vocab)
        self.position = {w: i for i, w in enumerate(self.words)}
        matrix = np.stack([vocab[w] for w in self.words]).astype(np.float64)
        norms = np.linalg.norm(matrix, axis=1)
        self.nonzero = norms > 0.0
        safe = np.where(self.nonzero, norms, 1.0)
        self.matrix = matrix / safe[:, None]

    def nearest(self, word: str) -> str | None:
        i = self.position[word]
        if not self.nonzero[i]:
            return None
        sims = self.matrix @ self.matrix[i]
        sims[i] = -np.inf
        sims[~self.nonzero] = -np.inf
        j = int(np.argmax(sims))
        if not np.isfinite(sims[j]):
            return None
        return self.words[j]


def augment_embedding(
    positives: Sequence[Sentence],
    store: EmbeddingStore,
    variants_per_sentence: int = 3,
    seed: int = 0,
) -> AugmentationResult:
    """Replace one drawn content word per variant with its nearest
    vocabulary neighbour.

    Requires the store's word-vector section. Variants are dropped (and
    counted) when a sentence has no content word in the vocabulary or the
    drawn word has no neighbour other than itself.
    """
    if not store.vocab:
        raise CapabilityError(
            "embedding store has no word-vector section; re-export with a "
            "vocabulary to use embedding replacement"
        )
    if variants_per_sentence < 1:
        raise ValidationError("variants_per_sentence must be at least 1")
    index = _VocabIndex(store.vocab)
    result = AugmentationResult()
    for sentence in positives:
        eligible = []
        for token in tokenize(sentence.text):
            if not is_content_word(token.text):
                continue
            if token.text in store.vocab:
                eligible.append((token, token.text))
            elif token.text.lower() in store.vocab:
                eligible.append((token, token.text.lower()))
        for variant_index in range(variants_per_sentence):
            rng = sentence_rng(seed, sentence.text, f"ER:{variant_index}")
            if not eligible:
                result.dropped += 1
                continue
            token, key = eligible[int(rng.integers(0, len(eligible)))]
            neighbor = index.nearest(key)
            if neighbor is None:
                result.dropped += 1
                continue
            replacement = _match_case(neighbor, token.text)
            text = _splice(
                sentence.text, [(token.start, token.end, replacement)]
            )
            result.add(
                AugmentedSentence(
                    base=sentence,
                    text=text,
                    method="ER",
                    params=(variant_index, token.text, neighbor),
                    identity=text == sentence.text,
                )
            )
    return result


def corpus_vocabulary(sentences: Sequence[Sentence]) -> tuple[str, ...]:
    """Sorted alphabetic whitespace tokens across the given sentences."""
    return tuple(
        sorted({w for s in sentences for w in s.text.split() if w.isalpha()})
    )


def augment_noise(
    positives: Sequence[Sentence],
    ops: Sequence[str] = NOISE_OPS,
    seed: int = 0,
    min_tokens: int = 4,
    delete_fraction: float = 0.1,
    substitute_fraction: float = 0.1,
    crop_fraction: float = 0.7,
    vocabulary: Sequence[str] | None = None,
) -> AugmentationResult:
    """One variant per sentence per operation on whitespace tokens.

    ``swap`` exchanges two drawn positions; ``delete`` removes ceil(10%) of
    the tokens; ``substitute`` replaces ceil(10%) with draws from the corpus
    vocabulary; ``crop`` keeps a contiguous window of at least 70% of the
    tokens (a full-length window is recorded as an identity variant).
    Sentences shorter than ``min_tokens`` skip the operation, counted.
    """
    ops = tuple(ops)
    unknown = sorted(set(ops) - set(NOISE_OPS))
    if unknown or not ops:
        raise ValidationError(
            f"noise ops must be a non-empty subset of {NOISE_OPS}, got {ops}"
        )
    if not 0.0 < delete_fraction < 1.0 or not 0.0 < substitute_fraction < 1.0:
        raise ValidationError("delete/substitute fractions must be in (0, 1)")
    if not 0.0 < crop_fraction <= 1.0:
        raise ValidationError("crop fraction must be in (0, 1]")
    if min_tokens < 2:
        raise ValidationError("min_tokens must be at least 2")
    vocab = tuple(vocabulary) if vocabulary is not None else corpus_vocabulary(
        positives
    )
    if "substitute" in ops and not vocab:
        raise ValidationError(
            "substitution needs a corpus vocabulary but none is available"
        )

    result = AugmentationResult()
    active = tuple(op for op in NOISE_OPS if op in ops)
    for sentence in positives:
        words = sentence.text.split()
        n = len(words)
        for op in active:
            if n < min_tokens:
                result.skipped += 1
                continue
            rng = sentence_rng(seed, sentence.text, f"NI-{op}")
            if op == "swap":
                i, j = (int(x) for x in rng.choice(n, size=2, replace=False))
                out = list(words)
                out[i], out[j] = out[j], out[i]
                params: tuple = (min(i, j), max(i, j))
            elif op == "delete":
                k = min(math.ceil(delete_fraction * n), n - 1)
                removed = sorted(
                    int(x) for x in rng.choice(n, size=k, replace=False)
                )
                out = [w for p, w in enumerate(words) if p not in set(removed)]
                params = tuple(removed)
            elif op == "substitute":
                k = min(math.ceil(substitute_fraction * n), n)
                positions = sorted(
                    int(x) for x in rng.choice(n, size=k, replace=False)
                )
                out = list(words)
                swaps = []
                for p in positions:
                    out[p] = vocab[int(rng.integers(0, len(vocab)))]
                    swaps.append((p, out[p]))
                params = tuple(swaps)
            else:  # crop
                shortest = max(1, math.ceil(crop_fraction * n))
                length = int(rng.integers(shortest, n + 1))
                if length >= n:
                    result.add(
                        AugmentedSentence(
                            base=sentence,
                            text=sentence.text,
                            method="NI-crop",
                            params=(0, n),
                            identity=True,
                        )
                    )
                    continue
                start = int(rng.integers(0, n - length + 1))
                out = words[start : start + length]
                params = (start, length)
            text = " ".join(out)
            result.add(
                AugmentedSentence(
                    base=sentence,
                    text=text,
                    method=f"NI-{op}",
                    params=params,
                    identity=text == sentence.text,
                )
            )
    return result


class MtClient(Protocol):
    """Translation client contract: text plus language pair in, text out."""

    def translate(self, text: str, src: str, dst: str) -> str: ...


class IdentityMtClient:
    """Offline stand-in that returns the input unchanged."""

    def translate(self, text: str, src: str, dst: str) -> str:
        return text


class HttpMtClient:
    """Translation over HTTP: POST {"text", "src", "dst"} -> {"text"}."""

    def __init__(
        self,
        endpoint: str | None = None,
        timeout: float = 30.0,
        retries: int = 3,
        backoff_base: float = 0.5,
        session=None,
    ):
        import os

        endpoint = endpoint or os.environ.get(MT_ENDPOINT_ENV_VAR)
        if not endpoint:
            raise ValidationError(
                "no translation endpoint configured; pass one or set "
                f"{MT_ENDPOINT_ENV_VAR}"
            )
        if retries < 1:
            raise ValidationError("retries must be at least 1")
        if session is None:
            import requests

            session = requests.Session()
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff_base = backoff_base
        self.session = session

    def translate(self, text: str, src: str, dst: str) -> str:
        import time

        payload = {"text": text, "src": src, "dst": dst}
        last_error: Exception | None = None
        for attempt in range(1, self.retries + 1):
            try:
                response = self.session.post(
                    self.endpoint, json=payload, timeout=self.timeout
                )
                response.raise_for_status()
                body = response.json()
                translated = body["text"]
                if not isinstance(translated, str) or not translated:
                    raise ExternalServiceError(
                        f"translation service returned an invalid body: {body!r}"
                    )
                return translated
            except ExternalServiceError:
                raise
            except Exception as exc:  # transport or decode failure
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff_base * 2 ** (attempt - 1))
        raise ExternalServiceError(
            f"translation request failed after {self.retries} attempts: "
            f"{last_error}"
        )


def augment_backtranslate(
    positives: Sequence[Sentence],
    mt: MtClient,
    pivots: Sequence[str] = DEFAULT_PIVOTS,
    src_lang: str = "en",
    max_failure_fraction: float = 0.2,
) -> AugmentationResult:
    """One variant per sentence per pivot language via a translation round
    trip.

    Per-sentence transport failures are recorded and the batch continues;
    once more than ``max_failure_fraction`` of the round trips have failed
    the whole run aborts.
    """
    pivots = tuple(pivots)
    if not pivots:
        raise ValidationError("at least one pivot language is required")
    result = AugmentationResult()
    attempts = 0
    for sentence in positives:
        for pivot in pivots:
            attempts += 1
            try:
                forward = mt.translate(sentence.text, src_lang, pivot)
                text = mt.translate(forward, pivot, src_lang)
                if not isinstance(text, str) or not text:
                    raise ExternalServiceError(
                        "translation client returned empty text"
                    )
            except Exception as exc:
                result.errors.append(
                    f"{sentence.dpa_id}#{sentence.sentence_index} "
                    f"[{pivot}]: {exc}"
                )
                continue
            result.add(
                AugmentedSentence(
                    base=sentence,
                    text=text,
                    method="BT",
                    params=(pivot,),
                    identity=text == sentence.text,
                )
            )
    if attempts and len(result.errors) / attempts > max_failure_fraction:
        raise ExternalServiceError(
            f"back-translation failed for {len(result.errors)} of {attempts} "
            f"round trips (more than {max_failure_fraction:.0%}); first "
            f"failure: {result.errors[0]}"
        )
    return result


# ---------------------------------------------------------------------------
# Recipes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UndersampleStep:
    def describe(self) -> str:
        return "undersample"


@dataclass(frozen=True)
class OversampleStep:
    def describe(self) -> str:
        return "oversample"


@dataclass(frozen=True)
class AugmentStep:
    """Augmentation step with its per-sentence multiplicity.

    The multiplicity pins how many variants each eligible sentence should
    produce; the supplied resources must agree (two pivots for BT x2, three
    neighbour variants for ER x3, and so on).
    """

    method: str
    multiplicity: int

    def __post_init__(self) -> None:
        if self.method not in ("BT", "SR", "ER", "NI"):
            raise ValidationError(f"unknown augmentation family {self.method!r}")
        if self.multiplicity < 1:
            raise ValidationError("augmentation multiplicity must be positive")

    def describe(self) -> str:
        return f"augment({self.method} x{self.multiplicity})"


RecipeStep = UndersampleStep | OversampleStep | AugmentStep


@dataclass(frozen=True)
class VariantRecipe:
    """Named, ordered list of balancing steps."""

    name: str
    steps: tuple[RecipeStep, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("recipe name must be non-empty")
        if not self.steps:
            raise ValidationError(f"recipe {self.name!r} has no steps")
        if sum(isinstance(s, UndersampleStep) for s in self.steps) > 1:
            raise ValidationError(
                f"recipe {self.name!r} has more than one undersample step"
            )
        if sum(isinstance(s, OversampleStep) for s in self.steps) > 1:
            raise ValidationError(
                f"recipe {self.name!r} has more than one oversample step"
            )


def _recipe(name: str, *steps: RecipeStep) -> VariantRecipe:
    return VariantRecipe(name, tuple(steps))


_ALL_AUGMENTS = (
    AugmentStep("BT", 2),
    AugmentStep("SR", 2),
    AugmentStep("ER", 3),
    AugmentStep("NI", 4),
)

BUILTIN_RECIPES: dict[str, VariantRecipe] = {
    recipe.name: recipe
    for recipe in (
        _recipe("RU", UndersampleStep()),
        _recipe("RO", OversampleStep()),
        _recipe("RUOS", UndersampleStep(), OversampleStep()),
        _recipe("BT", AugmentStep("BT", 2)),
        _recipe("SR", AugmentStep("SR", 2)),
        _recipe("ER", AugmentStep("ER", 3)),
        _recipe("NI", AugmentStep("NI", 4)),
        _recipe("BT-RUOS", AugmentStep("BT", 2), UndersampleStep(), OversampleStep()),
        _recipe("SR-RUOS", AugmentStep("SR", 2), UndersampleStep(), OversampleStep()),
        _recipe("ER-RUOS", AugmentStep("ER", 3), UndersampleStep(), OversampleStep()),
        _recipe("NI-RUOS", AugmentStep("NI", 4), UndersampleStep(), OversampleStep()),
        _recipe("ALL", *_ALL_AUGMENTS),
        _recipe("ALL-RUOS", *_ALL_AUGMENTS, UndersampleStep(), OversampleStep()),
    )
}


@dataclass
class Resources:
    """External inputs the augmentation steps may need."""

    lexicons: tuple[SynonymLexicon, ...] = ()
    store: EmbeddingStore | None = None
    mt_client: MtClient | None = None
    pivots: tuple[str, ...] = DEFAULT_PIVOTS
    noise_ops: tuple[str, ...] = NOISE_OPS
    max_replacements: int = 2
    min_tokens: int = 4
    delete_fraction: float = 0.1
    substitute_fraction: float = 0.1
    crop_fraction: float = 0.7


def _run_augment_step(
    step: AugmentStep, positives: Sequence[Sentence], seed: int, res: Resources
) -> AugmentationResult:
    if step.method == "BT":
        if res.mt_client is None:
            raise ValidationError(
                f"recipe step {step.describe()} requires a translation client"
            )
        if len(res.pivots) != step.multiplicity:
            raise ValidationError(
                f"recipe step {step.describe()} needs {step.multiplicity} "
                f"pivot languages, got {len(res.pivots)}"
            )
        return augment_backtranslate(positives, res.mt_client, res.pivots)
    if step.method == "SR":
        if not res.lexicons:
            raise ValidationError(
                f"recipe step {step.describe()} requires synonym lexicons"
            )
        if len(res.lexicons) != step.multiplicity:
            raise ValidationError(
                f"recipe step {step.describe()} needs {step.multiplicity} "
                f"lexicons, got {len(res.lexicons)}"
            )
        return augment_synonym(
            positives, res.lexicons, seed, res.max_replacements
        )
    if step.method == "ER":
        if res.store is None:
            raise ValidationError(
                f"recipe step {step.describe()} requires an embedding store"
            )
        return augment_embedding(positives, res.store, step.multiplicity, seed)
    if len(res.noise_ops) != step.multiplicity:
        raise ValidationError(
            f"recipe step {step.describe()} needs {step.multiplicity} noise "
            f"operations, got {len(res.noise_ops)}"
        )
    return augment_noise(
        positives,
        res.noise_ops,
        seed,
        min_tokens=res.min_tokens,
        delete_fraction=res.delete_fraction,
        substitute_fraction=res.substitute_fraction,
        crop_fraction=res.crop_fraction,
    )


def build_variant(
    dataset: Dataset,
    recipe: VariantRecipe,
    seed: int,
    resources: Resources | None = None,
) -> tuple[Dataset, dict]:
    """Apply a recipe's steps in order and report what happened.

    Augmentation steps only ever read the dataset's original positive
    examples — never resampled duplicates or other steps' variants — so
    each family contributes multiplicity x positives new examples (minus
    recorded drops and skips). The manifest holds the recipe name, seed,
    per-step accounting, and the final class counts.
    """
    res = resources or Resources()
    current = dataset
    step_records = []
    for step in recipe.steps:
        if isinstance(step, UndersampleStep):
            current = random_undersample(current, seed)
            step_records.append(
                {"step": step.describe(), "class_counts": current.class_counts()}
            )
            continue
        if isinstance(step, OversampleStep):
            current = random_oversample(current, seed)
            step_records.append(
                {"step": step.describe(), "class_counts": current.class_counts()}
            )
            continue
        originals = [
            e
            for e in current.examples
            if e.method == ORIGINAL_METHOD and e.label != OTHER_LABEL
        ]
        seen: set[tuple[str, int]] = set()
        positives = []
        labels: dict[tuple[str, int], str] = {}
        for example in originals:
            key = (example.sentence.dpa_id, example.sentence.sentence_index)
            if key in seen:
                continue
            seen.add(key)
            positives.append(example.sentence)
            labels[key] = example.label
        outcome = _run_augment_step(step, positives, seed, res)
        new_examples = tuple(
            Example(
                text=v.text,
                label=labels[(v.base.dpa_id, v.base.sentence_index)],
                sentence=v.base,
                method=v.method,
            )
            for v in outcome.variants
        )
        current = Dataset(current.task, current.examples + new_examples)
        step_records.append(
            {
                "step": step.describe(),
                "added": len(new_examples),
                "dropped": outcome.dropped,
                "skipped": outcome.skipped,
                "identities": outcome.identities,
                "errors": len(outcome.errors),
                "class_counts": current.class_counts(),
            }
        )
    manifest = {
        "recipe": recipe.name,
        "seed": seed,
        "steps": step_records,
        "class_counts": current.class_counts(),
    }
    return current, manifest
