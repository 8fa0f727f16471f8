"""Deterministic synthetic DPA corpus with planted, separable embeddings.

The package bundles a small demonstration corpus (``data/demo/``) so the
whole train → evaluate → check pipeline runs offline.  Everything here is a
pure function of a seed:

* sentence texts are assembled from per-provision phrase pools, so every
  provision has its own vocabulary and every sentence has at least four
  tokens and at least one content word;
* each sentence's embedding is its class center (a scaled coordinate axis)
  plus small noise keyed by the sentence text hash, so the class structure
  is linearly separable and the store can be regenerated from text alone;
* generated sentences never contain internal ``. : ; ? !`` characters, so a
  document joined with single spaces splits back into exactly the planted
  sentences.

Run ``python3 -m dpacheck.synth <directory>`` to regenerate the bundle.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dpacheck.balance import _MASK63, is_content_word
from dpacheck.corpus import (
    LabeledCorpus,
    Provision,
    ProvisionCatalog,
    Sentence,
    save_ground_truth,
)
from dpacheck.embedding import EmbeddingStore, fnv1a64
from dpacheck.errors import ValidationError

DEMO_SEED = 727
DEMO_DIM = 32
DEMO_NOISE = 0.05
DEMO_MODEL_ID = "synthetic-planted-v1"
USER_DPA_ID = "demo-user"
USER_DPA_SENTENCES = 184

# Planted gaps: these demo DPAs deliberately omit provisions so the checker's
# violation path has ground truth to hit.
DEMO_MISSING = {
    "demo-09": ("PO4", "PO11"),
    "demo-12": ("PO8", "PO16", "PO19"),
}


@dataclass(frozen=True)
class ProvisionTopic:
    """One processor obligation plus the phrase pools that express it."""

    pid: str
    title: str
    description: str
    verbs: tuple[str, ...]
    objects: tuple[str, ...]


# Nineteen processor obligations a complete agreement must address, each
# with its own wording pools so classes stay lexically distinct.
PROVISION_TOPICS: tuple[ProvisionTopic, ...] = (
    ProvisionTopic(
        "PO1",
        "documented instructions",
        "process personal data only on documented instructions from the controller",
        ("process personal data solely on", "act only upon", "follow strictly"),
        ("documented instructions issued by the controller",
         "written processing instructions from the controller",
         "the documented directions of the controller"),
    ),
    ProvisionTopic(
        "PO2",
        "confidentiality of authorised persons",
        "ensure persons authorised to process the data have committed to confidentiality",
        ("ensure that", "guarantee that", "verify that"),
        ("authorised personnel have signed binding confidentiality undertakings",
         "every authorised employee is bound by a duty of secrecy",
         "staff with data access observe strict confidentiality commitments"),
    ),
    ProvisionTopic(
        "PO3",
        "security measures",
        "implement appropriate technical and organisational security measures",
        ("implement", "maintain", "operate"),
        ("appropriate technical and organisational security measures",
         "state of the art encryption and access controls",
         "risk adjusted safeguards protecting personal data"),
    ),
    ProvisionTopic(
        "PO4",
        "subprocessor authorisation",
        "engage another processor only with prior authorisation of the controller",
        ("engage no", "appoint no", "retain no"),
        ("subprocessor without prior written authorisation",
         "additional processor without the prior consent of the controller",
         "downstream processor absent an approved authorisation"),
    ),
    ProvisionTopic(
        "PO5",
        "subprocessor obligations flow-down",
        "impose the same data protection obligations on any engaged subprocessor",
        ("impose", "flow down", "replicate"),
        ("identical data protection obligations on every subprocessor",
         "the same contractual duties onto each engaged subprocessor",
         "equivalent safeguards in every subprocessing contract"),
    ),
    ProvisionTopic(
        "PO6",
        "data subject request assistance",
        "assist the controller in responding to data subject rights requests",
        ("assist the controller in", "support the controller in", "help the controller with"),
        ("responding to data subject access requests",
         "fulfilling requests to rectify or erase personal data",
         "handling objections raised by data subjects"),
    ),
    ProvisionTopic(
        "PO7",
        "security and assessment assistance",
        "assist the controller with security duties and impact assessments",
        ("assist with", "contribute to", "support"),
        ("data protection impact assessments conducted by the controller",
         "prior consultations with the supervisory authority",
         "the evaluation of security obligations and residual risk"),
    ),
    ProvisionTopic(
        "PO8",
        "breach notification",
        "notify the controller without undue delay after becoming aware of a personal data breach",
        ("notify the controller of", "report to the controller", "escalate to the controller"),
        ("any personal data breach without undue delay",
         "every detected security incident affecting personal data",
         "suspected breaches of the processing systems immediately upon discovery"),
    ),
    ProvisionTopic(
        "PO9",
        "return or deletion at end of services",
        "delete or return all personal data after the end of the provision of services",
        ("delete or return", "return or destroy", "erase or hand back"),
        ("all personal data after the services terminate",
         "every copy of personal data once processing ends",
         "the processed records upon expiry of the engagement"),
    ),
    ProvisionTopic(
        "PO10",
        "compliance demonstration and audits",
        "make available compliance information and allow audits and inspections",
        ("make available", "provide", "disclose"),
        ("all information necessary to demonstrate compliance and allow audits",
         "evidence of compliance and permit inspections by approved auditors",
         "audit records demonstrating adherence to these clauses"),
    ),
    ProvisionTopic(
        "PO11",
        "unlawful instruction warning",
        "inform the controller if an instruction infringes data protection law",
        ("inform the controller immediately if", "warn the controller whenever", "alert the controller when"),
        ("an instruction infringes applicable data protection law",
         "a processing instruction conflicts with statutory requirements",
         "an order appears to violate the governing privacy legislation"),
    ),
    ProvisionTopic(
        "PO12",
        "records of processing",
        "maintain a written record of processing activities carried out for the controller",
        ("maintain", "keep", "curate"),
        ("a written record of all categories of processing activities",
         "an up to date register of processing operations",
         "complete documentation of processing activities performed"),
    ),
    ProvisionTopic(
        "PO13",
        "supervisory authority cooperation",
        "cooperate with the supervisory authority on request",
        ("cooperate with", "collaborate with", "work jointly with"),
        ("the supervisory authority on request in the performance of its tasks",
         "competent authorities during investigations and enquiries",
         "the regulator whenever cooperation is requested"),
    ),
    ProvisionTopic(
        "PO14",
        "data protection officer",
        "designate a data protection officer where required",
        ("designate", "appoint", "nominate"),
        ("a data protection officer where the law so requires",
         "a qualified privacy officer responsible for oversight",
         "an accountable data protection officer with published contact details"),
    ),
    ProvisionTopic(
        "PO15",
        "transfer safeguards",
        "transfer personal data to a third country only with appropriate safeguards",
        ("transfer no", "export no", "move no"),
        ("personal data to a third country without appropriate safeguards",
         "records abroad unless adequate transfer mechanisms apply",
         "data across borders absent recognised protection instruments"),
    ),
    ProvisionTopic(
        "PO16",
        "subprocessor change notice",
        "inform the controller of intended changes concerning subprocessors",
        ("give the controller advance notice of", "announce beforehand", "communicate in advance"),
        ("any intended addition or replacement of subprocessors",
         "planned changes to the roster of engaged subprocessors",
         "upcoming substitutions among approved subprocessors"),
    ),
    ProvisionTopic(
        "PO17",
        "purpose and scope limitation",
        "process personal data only for the purposes and duration specified in the agreement",
        ("limit processing to", "confine processing to", "restrict processing to"),
        ("the purposes and duration specified in this agreement",
         "the documented subject matter and retention period",
         "the agreed scope nature and purpose of processing"),
    ),
    ProvisionTopic(
        "PO18",
        "notification assistance",
        "assist the controller in notifying breaches to the authority and to data subjects",
        ("assist the controller in notifying", "support the notification of", "help communicate"),
        ("personal data breaches to the supervisory authority",
         "affected data subjects about qualifying breaches",
         "breach details to regulators and impacted individuals"),
    ),
    ProvisionTopic(
        "PO19",
        "liability for subprocessors",
        "remain fully liable to the controller for the performance of subprocessor obligations",
        ("remain fully liable for", "accept full liability for", "bear responsibility for"),
        ("the performance of every engaged subprocessor",
         "failures of subprocessors to meet their obligations",
         "acts and omissions of downstream processors"),
    ),
)

_SUBJECTS = ("The processor shall", "The service provider shall", "The vendor shall")

_TAILS = (
    "in accordance with this agreement",
    "for the full duration of the engagement",
    "at no additional charge to the controller",
    "as further detailed in the annex",
    "unless applicable law requires otherwise",
    "in a verifiable and documented manner",
)

_OTHER_SUBJECTS = ("This agreement", "The parties agree that this contract",
                   "Each party acknowledges that the schedule",
                   "The commercial annex", "The master services framework")

_OTHER_PREDICATES = (
    "is governed by the law named in the signature page",
    "sets out the invoicing calendar for the services",
    "describes the meeting cadence of the steering committee",
    "lists the contact persons for operational escalations",
    "records the agreed service credits and review dates",
    "defines the capitalised terms used throughout the document",
    "allocates the travel expenses incurred during delivery",
    "summarises the onboarding milestones for the first quarter",
)

_OTHER_TAILS = (
    "as amended from time to time",
    "subject to the agreed change procedure",
    "unless the parties decide otherwise in writing",
    "together with its referenced attachments",
    "for administrative convenience only",
    "without creating further obligations",
)


def demo_catalog() -> ProvisionCatalog:
    """The 19-provision obligation catalog used by the bundled corpus."""
    return ProvisionCatalog(
        provisions=tuple(
            Provision(t.pid, title=t.title, description=t.description)
            for t in PROVISION_TOPICS
        ),
        regulation_name="GDPR",
    )


_TOPIC_BY_ID = {t.pid: t for t in PROVISION_TOPICS}


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


def _pick(rng: np.random.Generator, pool: tuple[str, ...]) -> str:
    return pool[int(rng.integers(len(pool)))]


def provision_sentence_text(pid: str, rng: np.random.Generator) -> str:
    topic = _TOPIC_BY_ID[pid]
    return (f"{_pick(rng, _SUBJECTS)} {_pick(rng, topic.verbs)} "
            f"{_pick(rng, topic.objects)} {_pick(rng, _TAILS)}.")


def other_sentence_text(rng: np.random.Generator) -> str:
    return (f"{_pick(rng, _OTHER_SUBJECTS)} {_pick(rng, _OTHER_PREDICATES)} "
            f"{_pick(rng, _OTHER_TAILS)}.")


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic corpus; defaults produce the bundle."""

    seed: int = DEMO_SEED
    n_dpas: int = 12
    dim: int = DEMO_DIM
    noise: float = DEMO_NOISE
    min_support: int = 1
    max_support: int = 2
    min_other: int = 18
    max_other: int = 24
    missing: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEMO_MISSING)
    )

    def __post_init__(self):
        if self.n_dpas < 2:
            raise ValidationError("a corpus needs at least 2 DPAs to split")
        if not 1 <= self.min_support <= self.max_support:
            raise ValidationError("support counts must satisfy 1 <= min <= max")
        if not 1 <= self.min_other <= self.max_other:
            raise ValidationError("other counts must satisfy 1 <= min <= max")
        if self.dim < len(PROVISION_TOPICS) + 1:
            raise ValidationError(
                f"dim must be >= {len(PROVISION_TOPICS) + 1} to give every "
                "class its own axis"
            )
        if not 0.0 < self.noise < 0.5:
            raise ValidationError("noise must be in (0, 0.5) to keep classes apart")
        unknown = [d for d in self.missing if not d.startswith("demo-")]
        if unknown:
            raise ValidationError(f"missing-map keys must be demo DPA ids: {unknown}")


def _dpa_sentences(
    dpa_id: str,
    dpa_index: int,
    spec: SynthSpec,
    *,
    n_total: int | None = None,
    supports_per_provision: int | None = None,
) -> list[Sentence]:
    """Compose one DPA: planted supports for each non-missing provision plus
    filler, shuffled so provision sentences are scattered through the text."""
    rng = _rng(spec.seed, dpa_index)
    missing = frozenset(spec.missing.get(dpa_id, ()))
    rows: list[tuple[str, frozenset[str]]] = []
    for topic in PROVISION_TOPICS:
        if topic.pid in missing:
            continue
        if supports_per_provision is not None:
            k = supports_per_provision
        else:
            k = int(rng.integers(spec.min_support, spec.max_support + 1))
        for _ in range(k):
            rows.append((provision_sentence_text(topic.pid, rng),
                         frozenset({topic.pid})))
    if n_total is not None:
        n_other = n_total - len(rows)
        if n_other < 0:
            raise ValidationError(
                f"{dpa_id}: {len(rows)} planted supports exceed total {n_total}"
            )
    else:
        n_other = int(rng.integers(spec.min_other, spec.max_other + 1))
    for _ in range(n_other):
        rows.append((other_sentence_text(rng), frozenset()))

    order = rng.permutation(len(rows))
    return [
        Sentence(dpa_id=dpa_id, sentence_index=i, text=rows[j][0],
                 gold_labels=rows[j][1])
        for i, j in enumerate(order)
    ]


def generate_corpus(spec: SynthSpec | None = None) -> LabeledCorpus:
    """The labeled multi-DPA corpus with the gaps planted by ``SynthSpec``."""
    spec = spec or SynthSpec()
    dpas = {}
    for i in range(1, spec.n_dpas + 1):
        dpa_id = f"demo-{i:02d}"
        dpas[dpa_id] = _dpa_sentences(dpa_id, i, spec)
    return LabeledCorpus(
        catalog=demo_catalog(),
        dpas=dpas,
        provenance="synthetic demonstration corpus v1",
    )


def generate_user_dpa(spec: SynthSpec | None = None) -> list[Sentence]:
    """A complete, unlabeled-looking DPA of exactly 184 sentences.

    Gold labels are attached for verification; the rendered document drops
    them. Two supports per provision leave 146 filler sentences.
    """
    spec = spec or SynthSpec()
    return _dpa_sentences(
        USER_DPA_ID, 10_000, spec,
        n_total=USER_DPA_SENTENCES, supports_per_provision=2,
    )


def document_text(sentences: list[Sentence]) -> str:
    """Join planted sentences into one document that splits back exactly."""
    return " ".join(s.text for s in sentences)


def class_index_for(labels: frozenset[str], catalog: ProvisionCatalog) -> int:
    """Multiclass index of a sentence: lowest catalog index, or the trailing
    'other' index for unlabeled sentences."""
    if not labels:
        return len(catalog)
    return min(catalog.index_of(pid) for pid in labels)


def sentence_vector(
    text: str, class_index: int, *, dim: int, noise: float, seed: int
) -> np.ndarray:
    """Planted embedding: coordinate-axis class center plus keyed noise."""
    rng = _rng(seed & _MASK63, fnv1a64(text), class_index)
    vec = rng.normal(0.0, noise, size=dim)
    vec[class_index] += 1.0
    return vec.astype(np.float32)


def word_vector(word: str, *, dim: int, seed: int) -> np.ndarray:
    """Unit word vector for the store's vocabulary section."""
    rng = _rng(seed & _MASK63, fnv1a64(word), fnv1a64("vocab"))
    vec = rng.normal(0.0, 1.0, size=dim)
    return (vec / np.linalg.norm(vec)).astype(np.float32)


def content_words(sentences: list[Sentence]) -> list[str]:
    """Sorted lowercase content words across all sentence texts."""
    words = {
        token.lower()
        for s in sentences
        for token in s.text.split()
        if is_content_word(token.lower())
    }
    return sorted(words)


def build_store(
    sentences: list[Sentence],
    catalog: ProvisionCatalog,
    *,
    dim: int = DEMO_DIM,
    noise: float = DEMO_NOISE,
    seed: int = DEMO_SEED,
    model_id: str = DEMO_MODEL_ID,
    with_vocab: bool = True,
) -> EmbeddingStore:
    """Embedding store covering every sentence (and optionally the vocab)."""
    entries = {}
    for s in sentences:
        h = fnv1a64(s.text)
        if h not in entries:
            entries[h] = sentence_vector(
                s.text, class_index_for(s.gold_labels, catalog),
                dim=dim, noise=noise, seed=seed,
            )
    vocab = {}
    if with_vocab:
        vocab = {
            w: word_vector(w, dim=dim, seed=seed) for w in content_words(sentences)
        }
    return EmbeddingStore(dim=dim, model_id=model_id, entries=entries, vocab=vocab)


def positive_sentences(n: int, seed: int = DEMO_SEED) -> list[Sentence]:
    """``n`` provision-labeled sentences cycling through the catalog.

    Every sentence has one label, at least four tokens, and at least one
    content word, which makes the whole batch eligible for every
    augmentation family with zero drops.
    """
    if n < 1:
        raise ValidationError("need at least one sentence")
    out = []
    for i in range(n):
        topic = PROVISION_TOPICS[i % len(PROVISION_TOPICS)]
        rng = _rng(seed, 20_000, i)
        out.append(
            Sentence(
                dpa_id="synthetic-pool",
                sentence_index=i,
                text=provision_sentence_text(topic.pid, rng),
                gold_labels=frozenset({topic.pid}),
            )
        )
    return out


CATALOG_FILE = "catalog.json"
CORPUS_FILE = "corpus.jsonl"
STORE_FILE = "embeddings.embs"
USER_DPA_FILE = "user_dpa.txt"
USER_GOLD_FILE = "user_dpa_gold.json"
MANIFEST_FILE = "manifest.json"


def write_demo(directory: str | Path, spec: SynthSpec | None = None) -> dict:
    """Write the full demo bundle; returns the manifest (also saved)."""
    spec = spec or SynthSpec()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    catalog = demo_catalog()
    corpus = generate_corpus(spec)
    user = generate_user_dpa(spec)

    catalog.to_file(str(directory / CATALOG_FILE))
    save_ground_truth(corpus, str(directory / CORPUS_FILE))

    everything = [s for dpa in corpus.dpa_ids for s in corpus.dpas[dpa]] + user
    store = build_store(
        everything, catalog, dim=spec.dim, noise=spec.noise, seed=spec.seed
    )
    store.save(str(directory / STORE_FILE))

    (directory / USER_DPA_FILE).write_text(document_text(user) + "\n",
                                           encoding="utf-8")
    satisfied = sorted({pid for s in user for pid in s.gold_labels},
                       key=catalog.index_of)
    gold = {
        "dpa_id": USER_DPA_ID,
        "n_sentences": len(user),
        "satisfied": satisfied,
        "missing": [p for p in catalog.ids if p not in satisfied],
    }
    (directory / USER_GOLD_FILE).write_text(
        json.dumps(gold, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    files = [CATALOG_FILE, CORPUS_FILE, STORE_FILE, USER_DPA_FILE, USER_GOLD_FILE]
    manifest = {
        "generator": "dpacheck.synth",
        "seed": spec.seed,
        "dim": spec.dim,
        "noise": spec.noise,
        "counts": {
            "dpas": len(corpus.dpas),
            "sentences": len(corpus),
            "positive_sentences": sum(
                1 for s in corpus.sentences() if s.is_positive
            ),
            "store_entries": len(store),
            "vocab_words": len(store.vocab),
            "user_dpa_sentences": len(user),
        },
        "missing": {k: list(v) for k, v in sorted(spec.missing.items())},
        "files": {
            name: "sha256:"
            + hashlib.sha256((directory / name).read_bytes()).hexdigest()
            for name in files
        },
    }
    (directory / MANIFEST_FILE).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def demo_path() -> Path:
    """Directory of the bundled demo artifacts."""
    from importlib.resources import files

    return Path(str(files("dpacheck") / "data" / "demo"))


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "demo"
    written = write_demo(target)
    print(json.dumps(written["counts"], indent=2, sort_keys=True))
