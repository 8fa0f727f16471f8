"""Ground-truth data model: provision catalog, labeled sentences, splits.

File formats
------------
Catalog: a JSON object ``{"regulation_name": str, "provisions": [{"id",
"title", "description"}, ...]}``. Provision order is significant; it defines
class indices for multi-class training.

Ground truth: UTF-8 JSON Lines, one sentence record per line:
``{"dpa_id": str, "sentence_index": int, "text": str, "labels": [str]}``.
An optional first line ``{"meta": {...}}`` may carry provenance and
``expected_counts`` (``dpas`` / ``sentences`` / ``positive_sentences``),
which the loader verifies against the actual file content.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

_PROVISION_ID_RE = re.compile(r"^[A-Za-z]+[0-9]+$")


@dataclass(frozen=True)
class Provision:
    id: str
    title: str = ""
    description: str = ""


@dataclass(frozen=True)
class ProvisionCatalog:
    """Ordered set of provisions a document must satisfy to be complete."""

    provisions: tuple[Provision, ...]
    regulation_name: str = ""

    def __post_init__(self):
        if not self.provisions:
            raise ValidationError("catalog must contain at least one provision")
        seen = set()
        for p in self.provisions:
            if not _PROVISION_ID_RE.match(p.id):
                raise ValidationError(
                    f"provision id {p.id!r} must be letters followed by digits"
                )
            if p.id in seen:
                raise ValidationError(f"duplicate provision id {p.id!r}")
            seen.add(p.id)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.provisions]

    def __len__(self) -> int:
        return len(self.provisions)

    def __contains__(self, provision_id: str) -> bool:
        return provision_id in set(self.ids)

    def index_of(self, provision_id: str) -> int:
        try:
            return self.ids.index(provision_id)
        except ValueError:
            raise ValidationError(f"unknown provision {provision_id}") from None

    @classmethod
    def from_file(cls, path: str) -> "ProvisionCatalog":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid catalog JSON: {exc}", path=path) from exc
        provisions = tuple(
            Provision(
                id=str(entry["id"]),
                title=str(entry.get("title", "")),
                description=str(entry.get("description", "")),
            )
            for entry in raw.get("provisions", [])
        )
        return cls(provisions, regulation_name=str(raw.get("regulation_name", "")))

    def to_file(self, path: str) -> None:
        payload = {
            "regulation_name": self.regulation_name,
            "provisions": [
                {"id": p.id, "title": p.title, "description": p.description}
                for p in self.provisions
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class Sentence:
    """One annotated sentence; empty ``gold_labels`` marks the 'other' class."""

    dpa_id: str
    sentence_index: int
    text: str
    gold_labels: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError(
                f"sentence {self.dpa_id}:{self.sentence_index} has empty text"
            )

    @property
    def is_positive(self) -> bool:
        return bool(self.gold_labels)


@dataclass
class LabeledCorpus:
    catalog: ProvisionCatalog
    dpas: dict[str, list[Sentence]] = field(default_factory=dict)
    provenance: str = ""

    def __post_init__(self):
        for dpa_id, sentences in self.dpas.items():
            indices = set()
            for s in sentences:
                if s.dpa_id != dpa_id:
                    raise ValidationError(
                        f"sentence tagged {s.dpa_id!r} filed under DPA {dpa_id!r}"
                    )
                if s.sentence_index in indices:
                    raise ValidationError(
                        f"duplicate sentence_index {s.sentence_index} in DPA {dpa_id}"
                    )
                indices.add(s.sentence_index)
                for label in s.gold_labels:
                    if label not in self.catalog:
                        raise ValidationError(f"unknown provision {label}")

    @property
    def dpa_ids(self) -> list[str]:
        return list(self.dpas.keys())

    def sentences(self):
        for sentences in self.dpas.values():
            yield from sentences

    def __len__(self) -> int:
        return sum(len(s) for s in self.dpas.values())

    def gold_satisfied(self, dpa_id: str) -> frozenset[str]:
        """Provisions with at least one gold-labeled sentence in the DPA."""
        labels: set[str] = set()
        for s in self.dpas[dpa_id]:
            labels |= s.gold_labels
        return frozenset(labels)

    def subset(self, dpa_ids: list[str], provenance: str) -> "LabeledCorpus":
        return LabeledCorpus(
            catalog=self.catalog,
            dpas={dpa_id: self.dpas[dpa_id] for dpa_id in dpa_ids},
            provenance=provenance,
        )


def load_ground_truth(path: str, catalog_path: str) -> LabeledCorpus:
    """Load and validate a ground-truth file against its catalog.

    Raises :class:`ParseError` (with a line number) on malformed records and
    :class:`ValidationError` on unknown provision ids, duplicate
    ``(dpa_id, sentence_index)`` pairs, or a failed ``expected_counts``
    self-check.
    """
    catalog = ProvisionCatalog.from_file(catalog_path)
    dpas: dict[str, list[Sentence]] = {}
    provenance = path
    expected_counts = None

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", path=path, line=lineno) from exc
            if "meta" in record:
                meta = record["meta"]
                provenance = meta.get("provenance", provenance)
                expected_counts = meta.get("expected_counts")
                continue
            try:
                sentence = Sentence(
                    dpa_id=str(record["dpa_id"]),
                    sentence_index=int(record["sentence_index"]),
                    text=str(record["text"]),
                    gold_labels=frozenset(str(l) for l in record.get("labels", [])),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad record: {exc}", path=path, line=lineno) from exc
            dpas.setdefault(sentence.dpa_id, []).append(sentence)

    for sentences in dpas.values():
        sentences.sort(key=lambda s: s.sentence_index)
    corpus = LabeledCorpus(catalog=catalog, dpas=dpas, provenance=provenance)

    if expected_counts is not None:
        actual = {
            "dpas": len(corpus.dpas),
            "sentences": len(corpus),
            "positive_sentences": sum(1 for s in corpus.sentences() if s.is_positive),
        }
        for key, claimed in expected_counts.items():
            if key not in actual:
                raise ValidationError(f"unknown expected_counts key {key!r}")
            if actual[key] != claimed:
                raise ValidationError(
                    f"corpus claims {claimed} {key} but file contains {actual[key]}"
                )
    return corpus


def save_ground_truth(corpus: LabeledCorpus, path: str) -> None:
    """Write a corpus back to JSON Lines, byte-deterministically."""
    with open(path, "w", encoding="utf-8") as fh:
        if corpus.provenance:
            fh.write(
                json.dumps(
                    {"meta": {"provenance": corpus.provenance}},
                    sort_keys=True,
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
                + "\n"
            )
        for dpa_id in corpus.dpa_ids:
            for s in corpus.dpas[dpa_id]:
                record = {
                    "dpa_id": s.dpa_id,
                    "sentence_index": s.sentence_index,
                    "text": s.text,
                    "labels": sorted(s.gold_labels),
                }
                fh.write(
                    json.dumps(
                        record, sort_keys=True, ensure_ascii=False, separators=(",", ":")
                    )
                    + "\n"
                )


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    dev_fraction: float = 0.70
    val_fraction_of_dev: float = 0.20

    def __post_init__(self):
        for name in ("dev_fraction", "val_fraction_of_dev"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValidationError(f"{name} must be strictly inside (0,1)")


@dataclass(frozen=True)
class CorpusSplit:
    dev: LabeledCorpus
    eval: LabeledCorpus
    train: LabeledCorpus
    val: LabeledCorpus

    def assignment(self) -> dict[str, str]:
        """dpa_id -> part name, over the disjoint parts train/val/eval."""
        out = {}
        for name in ("train", "val", "eval"):
            for dpa_id in getattr(self, name).dpa_ids:
                out[dpa_id] = name
        return out


def split_dpas(corpus: LabeledCorpus, spec: SplitSpec) -> CorpusSplit:
    """Partition a corpus into dev/eval and dev into train/val, by whole DPA.

    DPA ids are sorted lexicographically, shuffled by the seed, and cut:
    ``|dev| = round(dev_fraction * |DPAs|)``, the remainder is eval; within
    dev the last ``round(val_fraction_of_dev * |dev|)`` DPAs form val. The
    seed is the only source of variation. dev, eval and train must be
    non-empty; a val of zero DPAs is legal for very small corpora.
    """
    import numpy as np

    ids = sorted(corpus.dpa_ids)
    if len(ids) < 2:
        raise ValidationError("cannot split a corpus with fewer than 2 DPAs")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    order = [ids[i] for i in rng.permutation(len(ids))]

    n_dev = int(len(ids) * spec.dev_fraction + 0.5)
    n_dev = min(max(n_dev, 1), len(ids) - 1)
    dev_ids, eval_ids = order[:n_dev], order[n_dev:]

    n_val = int(n_dev * spec.val_fraction_of_dev + 0.5)
    if n_val >= n_dev:
        n_val = n_dev - 1
    train_ids, val_ids = dev_ids[: n_dev - n_val], dev_ids[n_dev - n_val :]
    if not train_ids or not eval_ids:
        raise ValidationError(
            f"{len(ids)} DPAs cannot fill non-empty train/eval parts "
            f"at dev_fraction={spec.dev_fraction}"
        )

    tag = f"seed={spec.seed}"
    return CorpusSplit(
        dev=corpus.subset(dev_ids, f"dev({tag}) of {corpus.provenance}"),
        eval=corpus.subset(eval_ids, f"eval({tag}) of {corpus.provenance}"),
        train=corpus.subset(train_ids, f"train({tag}) of {corpus.provenance}"),
        val=corpus.subset(val_ids, f"val({tag}) of {corpus.provenance}"),
    )


@dataclass(frozen=True)
class StatsTable:
    total_dpas: int
    total_sentences: int
    positive_sentences: int
    per_provision: dict[str, int]

    @property
    def positive_fraction(self) -> float:
        if self.total_sentences == 0:
            return 0.0
        return self.positive_sentences / self.total_sentences

    def rows(self) -> list[tuple[str, int]]:
        return list(self.per_provision.items())


def corpus_stats(corpus: LabeledCorpus) -> StatsTable:
    """Per-provision positive counts plus corpus totals."""
    counts = {pid: 0 for pid in corpus.catalog.ids}
    positives = 0
    total = 0
    for s in corpus.sentences():
        total += 1
        if s.is_positive:
            positives += 1
        for label in s.gold_labels:
            counts[label] += 1
    return StatsTable(
        total_dpas=len(corpus.dpas),
        total_sentences=total,
        positive_sentences=positives,
        per_provision=counts,
    )
