"""Completeness verdicts: aggregate sentence predictions per provision and
render the report.

A provision is satisfied when at least one sentence is predicted to support
it and violated otherwise — the verdict depends only on whether support
exists, never on score values (scores order the supporting sentences and
feed the optional confidence floor). Reports list violations first, in
catalog order, for recall-oriented triage, and carry the tool version plus
model and catalog digests for audit.

Two render formats: ``human`` is a plain-text document containing the
literal line ``COMPLETE: yes``/``COMPLETE: no`` and one ``VIOLATION`` line
per missing provision; ``machine`` is JSON that :func:`parse_report` turns
back into an equal :class:`CompletenessReport`. Supporting sentences are
rendered with whatever text the predictions carried — the pipeline passes
original sentence text unless normalization was requested upstream.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from . import __version__
from .corpus import ProvisionCatalog
from .errors import ParseError, ValidationError


def sha256_hex(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def digest_file(path) -> str:
    with open(path, "rb") as fh:
        return sha256_hex(fh.read())


def catalog_digest(catalog: ProvisionCatalog) -> str:
    payload = {
        "regulation_name": catalog.regulation_name,
        "provisions": [
            {"id": p.id, "title": p.title, "description": p.description}
            for p in catalog.provisions
        ],
    }
    return sha256_hex(
        json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    )


@dataclass(frozen=True)
class SentencePrediction:
    """Predicted provision labels for one sentence, with confidences."""

    dpa_id: str
    sentence_index: int
    text: str
    predicted_labels: frozenset[str]
    scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.sentence_index < 0:
            raise ValidationError("sentence_index must be non-negative")
        object.__setattr__(
            self, "predicted_labels", frozenset(self.predicted_labels)
        )
        for label in self.predicted_labels:
            score = self.scores.get(label)
            if score is None:
                raise ValidationError(
                    f"predicted label {label!r} has no score"
                )
            if not math.isfinite(float(score)):
                raise ValidationError(
                    f"score for {label!r} must be finite, got {score}"
                )


@dataclass(frozen=True)
class Support:
    """One sentence backing a provision."""

    sentence_index: int
    text: str
    score: float


def aggregate(
    predictions,
    catalog: ProvisionCatalog,
    confidence_floor: float = 0.0,
) -> dict[str, tuple[Support, ...]]:
    """Group one DPA's predictions by provision.

    Every catalog provision maps to its supporting sentences, sorted by
    descending score and then sentence index. With a positive
    ``confidence_floor``, predictions scoring below it do not count as
    support; the default 0.0 disables the floor entirely.
    """
    predictions = list(predictions)
    dpa_ids = {p.dpa_id for p in predictions}
    if len(dpa_ids) > 1:
        raise ValidationError(
            f"predictions span several DPAs: {sorted(dpa_ids)}"
        )
    seen_indices = set()
    known = set(catalog.ids)
    buckets: dict[str, list[Support]] = {pid: [] for pid in catalog.ids}
    for prediction in predictions:
        if prediction.sentence_index in seen_indices:
            raise ValidationError(
                f"duplicate prediction for sentence {prediction.sentence_index}"
            )
        seen_indices.add(prediction.sentence_index)
        for label in prediction.predicted_labels:
            if label not in known:
                raise ValidationError(f"unknown provision {label}")
            score = float(prediction.scores[label])
            if confidence_floor > 0.0 and score < confidence_floor:
                continue
            buckets[label].append(
                Support(prediction.sentence_index, prediction.text, score)
            )
    return {
        pid: tuple(
            sorted(items, key=lambda s: (-s.score, s.sentence_index))
        )
        for pid, items in buckets.items()
    }


@dataclass(frozen=True)
class ProvisionVerdict:
    provision_id: str
    satisfied: bool
    supporting: tuple[Support, ...]

    def __post_init__(self) -> None:
        if self.satisfied != bool(self.supporting):
            raise ValidationError(
                f"{self.provision_id}: satisfied must mean at least one "
                "supporting sentence"
            )


@dataclass(frozen=True)
class CompletenessReport:
    dpa_id: str
    verdicts: tuple[ProvisionVerdict, ...]
    tool_version: str
    model_digest: str
    catalog_digest: str

    def __post_init__(self) -> None:
        ids = [v.provision_id for v in self.verdicts]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate provision in report")

    @property
    def violated(self) -> tuple[str, ...]:
        return tuple(v.provision_id for v in self.verdicts if not v.satisfied)

    @property
    def violation_count(self) -> int:
        return len(self.violated)

    @property
    def satisfied_count(self) -> int:
        return len(self.verdicts) - self.violation_count

    @property
    def complete(self) -> bool:
        return self.violation_count == 0


def check_completeness(
    agg: dict[str, tuple[Support, ...]],
    catalog: ProvisionCatalog,
    dpa_id: str,
    *,
    model_digest: str = "",
    catalog_digest_value: str | None = None,
    tool_version: str | None = None,
) -> CompletenessReport:
    """Turn aggregated support into per-provision verdicts.

    A provision with no supporting sentence is violated; the DPA is complete
    exactly when no provision is violated.
    """
    extra = sorted(set(agg) - set(catalog.ids))
    if extra:
        raise ValidationError(f"aggregation mentions unknown provisions: {extra}")
    verdicts = []
    for pid in catalog.ids:
        supporting = tuple(agg.get(pid, ()))
        verdicts.append(ProvisionVerdict(pid, bool(supporting), supporting))
    return CompletenessReport(
        dpa_id=dpa_id,
        verdicts=tuple(verdicts),
        tool_version=__version__ if tool_version is None else tool_version,
        model_digest=model_digest,
        catalog_digest=(
            catalog_digest(catalog)
            if catalog_digest_value is None
            else catalog_digest_value
        ),
    )


def check_dpa(
    predictions,
    catalog: ProvisionCatalog,
    dpa_id: str | None = None,
    confidence_floor: float = 0.0,
    *,
    model_digest: str = "",
) -> CompletenessReport:
    """Aggregate and check in one call."""
    predictions = list(predictions)
    if dpa_id is None:
        if not predictions:
            raise ValidationError(
                "dpa_id is required when there are no predictions"
            )
        dpa_id = predictions[0].dpa_id
    agg = aggregate(predictions, catalog, confidence_floor)
    return check_completeness(
        agg, catalog, dpa_id, model_digest=model_digest
    )


def _titles(catalog: ProvisionCatalog | None) -> dict[str, str]:
    if catalog is None:
        return {}
    return {p.id: p.title for p in catalog.provisions}


def render_report(
    report: CompletenessReport,
    fmt: str = "human",
    catalog: ProvisionCatalog | None = None,
) -> str:
    """Render as a human text document or a machine JSON document.

    The human format puts one ``VIOLATION`` line per missing provision, in
    catalog order, ahead of the satisfied provisions and their supporting
    excerpts. Passing the catalog adds provision titles to the headings.
    """
    if fmt == "machine":
        return _render_machine(report)
    if fmt != "human":
        raise ValidationError(f"unknown report format {fmt!r}")
    titles = _titles(catalog)
    lines = [
        "DPA COMPLETENESS REPORT",
        f"dpa: {report.dpa_id}",
        f"tool version: {report.tool_version}",
        f"model digest: {report.model_digest or '-'}",
        f"catalog digest: {report.catalog_digest}",
        f"COMPLETE: {'yes' if report.complete else 'no'}",
        f"satisfied: {report.satisfied_count} of {len(report.verdicts)} "
        f"provisions; missing: {report.violation_count}",
        "",
    ]
    for verdict in report.verdicts:
        if verdict.satisfied:
            continue
        title = titles.get(verdict.provision_id, "")
        suffix = f": {title}" if title else ""
        lines.append(f"VIOLATION {verdict.provision_id}{suffix}")
    if report.violation_count:
        lines.append("")
    for verdict in report.verdicts:
        if not verdict.satisfied:
            continue
        title = titles.get(verdict.provision_id, "")
        suffix = f" ({title})" if title else ""
        lines.append(
            f"SATISFIED {verdict.provision_id}{suffix}: "
            f"{len(verdict.supporting)} supporting sentence(s)"
        )
        for support in verdict.supporting:
            lines.append(
                f"  [{support.sentence_index}] score={support.score:.4f} "
                f"{support.text}"
            )
    return "\n".join(lines) + "\n"


def _render_machine(report: CompletenessReport) -> str:
    payload = {
        "kind": "completeness_report",
        "dpa_id": report.dpa_id,
        "tool_version": report.tool_version,
        "model_digest": report.model_digest,
        "catalog_digest": report.catalog_digest,
        "summary": {
            "satisfied_count": report.satisfied_count,
            "violation_count": report.violation_count,
            "complete": report.complete,
        },
        "provisions": [
            {
                "id": v.provision_id,
                "status": "satisfied" if v.satisfied else "violated",
                "supporting": [
                    {
                        "sentence_index": s.sentence_index,
                        "text": s.text,
                        "score": s.score,
                    }
                    for s in v.supporting
                ],
            }
            for v in report.verdicts
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def parse_report(document: str) -> CompletenessReport:
    """Parse a machine-format report back into an equal object."""
    try:
        payload = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("kind") != "completeness_report":
        raise ParseError("document is not a completeness report")
    try:
        verdicts = tuple(
            ProvisionVerdict(
                provision_id=str(entry["id"]),
                satisfied=entry["status"] == "satisfied",
                supporting=tuple(
                    Support(
                        sentence_index=int(s["sentence_index"]),
                        text=str(s["text"]),
                        score=float(s["score"]),
                    )
                    for s in entry["supporting"]
                ),
            )
            for entry in payload["provisions"]
        )
        report = CompletenessReport(
            dpa_id=str(payload["dpa_id"]),
            verdicts=verdicts,
            tool_version=str(payload["tool_version"]),
            model_digest=str(payload["model_digest"]),
            catalog_digest=str(payload["catalog_digest"]),
        )
        summary = payload["summary"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"report is missing a field: {exc}") from exc
    if (
        summary.get("satisfied_count") != report.satisfied_count
        or summary.get("violation_count") != report.violation_count
        or summary.get("complete") != report.complete
    ):
        raise ValidationError("report summary contradicts its verdicts")
    return report
