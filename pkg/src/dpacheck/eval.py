"""Evaluation harness: provision-level confusion, F-beta metrics, Cohen's
kappa, and wall-clock benchmarking.

Verdicts are compared at the DPA level: for each provision, a DPA counts as
TP when gold and prediction both mark it satisfied, FP when only the
prediction does, FN when only gold does, TN when neither. Ratios with an
empty denominator are reported as 0 and flagged "undefined"; macro averages
skip flagged cells and say so in a footnote.
"""

from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .corpus import ProvisionCatalog
from .errors import ValidationError


@dataclass(frozen=True)
class ConfusionCell:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCell") -> "ConfusionCell":
        return ConfusionCell(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class ProvisionConfusion:
    cells: dict[str, ConfusionCell]
    n_dpas: int

    def pooled(self) -> ConfusionCell:
        out = ConfusionCell()
        for cell in self.cells.values():
            out = out + cell
        return out


def dpa_confusion(
    gold: dict[str, frozenset], predicted: dict[str, frozenset], catalog: ProvisionCatalog
) -> ProvisionConfusion:
    """Per-provision TP/FP/FN/TN over DPAs from satisfied-provision sets."""
    if set(gold) != set(predicted):
        missing = set(gold) ^ set(predicted)
        raise ValidationError(f"gold/predicted DPA ids differ: {sorted(missing)[:5]}")
    counts = {pid: [0, 0, 0, 0] for pid in catalog.ids}
    for dpa_id in gold:
        g, p = gold[dpa_id], predicted[dpa_id]
        for pid in catalog.ids:
            in_gold, in_pred = pid in g, pid in p
            if in_gold and in_pred:
                counts[pid][0] += 1
            elif in_pred:
                counts[pid][1] += 1
            elif in_gold:
                counts[pid][2] += 1
            else:
                counts[pid][3] += 1
    return ProvisionConfusion(
        cells={pid: ConfusionCell(*c) for pid, c in counts.items()},
        n_dpas=len(gold),
    )


def fbeta(precision: float, recall: float, beta: float = 2.0) -> float:
    """(1+b^2)PR / (b^2 P + R); 0 when the denominator vanishes."""
    if beta <= 0:
        raise ValidationError("beta must be positive")
    denominator = beta * beta * precision + recall
    if denominator == 0.0:
        return 0.0
    return (1.0 + beta * beta) * precision * recall / denominator


@dataclass
class MetricRow:
    accuracy: float
    precision: float
    recall: float
    fbeta: float
    undefined: frozenset[str] = frozenset()

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "fbeta": self.fbeta,
            "undefined": sorted(self.undefined),
        }


def _row_from_cell(cell: ConfusionCell, beta: float) -> MetricRow:
    undefined = set()
    if cell.total == 0:
        undefined.add("accuracy")
        accuracy = 0.0
    else:
        accuracy = (cell.tp + cell.tn) / cell.total
    if cell.tp + cell.fp == 0:
        undefined.add("precision")
        precision = 0.0
    else:
        precision = cell.tp / (cell.tp + cell.fp)
    if cell.tp + cell.fn == 0:
        undefined.add("recall")
        recall = 0.0
    else:
        recall = cell.tp / (cell.tp + cell.fn)
    if beta * beta * precision + recall == 0.0:
        undefined.add("fbeta")
    return MetricRow(accuracy, precision, recall, fbeta(precision, recall, beta),
                     frozenset(undefined))


@dataclass
class MetricsSummary:
    beta: float
    per_provision: dict[str, MetricRow]
    micro: MetricRow
    macro: MetricRow
    footnotes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "per_provision": {p: r.as_dict() for p, r in self.per_provision.items()},
            "micro": self.micro.as_dict(),
            "macro": self.macro.as_dict(),
            "footnotes": list(self.footnotes),
        }


def compute_metrics(conf: ProvisionConfusion, beta: float = 2.0) -> MetricsSummary:
    """Accuracy, precision, recall, and F-beta per provision, micro, macro.

    Micro pools raw counts; macro is the unweighted mean over provisions,
    skipping cells whose value is flagged undefined for that metric.
    """
    per_provision = {
        pid: _row_from_cell(cell, beta) for pid, cell in conf.cells.items()
    }
    micro = _row_from_cell(conf.pooled(), beta)

    footnotes = []
    macro_values = {}
    macro_undefined = set()
    for metric in ("accuracy", "precision", "recall", "fbeta"):
        usable = [
            getattr(row, metric)
            for row in per_provision.values()
            if metric not in row.undefined
        ]
        skipped = len(per_provision) - len(usable)
        if skipped:
            footnotes.append(
                f"macro {metric} skips {skipped} provision(s) with undefined {metric}"
            )
        if usable:
            macro_values[metric] = float(np.mean(usable))
        else:
            macro_values[metric] = 0.0
            macro_undefined.add(metric)
    macro = MetricRow(
        macro_values["accuracy"],
        macro_values["precision"],
        macro_values["recall"],
        macro_values["fbeta"],
        frozenset(macro_undefined),
    )
    return MetricsSummary(beta, per_provision, micro, macro, footnotes)


def metrics_table(summary: MetricsSummary, delimiter: str = "\t") -> str:
    """Delimited text table: one row per provision plus micro and macro."""
    lines = [
        delimiter.join(
            ["provision", "accuracy", "precision", "recall",
             f"f{summary.beta:g}", "undefined"]
        )
    ]

    def fmt(row: MetricRow, name: str) -> str:
        return delimiter.join(
            [
                name,
                f"{row.accuracy:.4f}",
                f"{row.precision:.4f}",
                f"{row.recall:.4f}",
                f"{row.fbeta:.4f}",
                ",".join(sorted(row.undefined)) or "-",
            ]
        )

    for pid, row in summary.per_provision.items():
        lines.append(fmt(row, pid))
    lines.append(fmt(summary.micro, "micro"))
    lines.append(fmt(summary.macro, "macro"))
    for note in summary.footnotes:
        lines.append(f"# {note}")
    return "\n".join(lines) + "\n"


def sentence_fbeta(y_true: np.ndarray, y_pred: np.ndarray, positive_classes,
                   beta: float = 2.0) -> float:
    """Sentence-level F-beta used for model selection.

    One positive class gives plain F-beta on it; several give the unweighted
    macro mean over them (classes absent from both truth and prediction are
    skipped).
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    scores = []
    for cls in positive_classes:
        tp = int(np.sum((y_true == cls) & (y_pred == cls)))
        fp = int(np.sum((y_true != cls) & (y_pred == cls)))
        fn = int(np.sum((y_true == cls) & (y_pred != cls)))
        if tp + fp + fn == 0:
            continue
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(fbeta(precision, recall, beta))
    return float(np.mean(scores)) if scores else 0.0


def cohen_kappa(labels_a, labels_b) -> float:
    """Chance-corrected agreement from the two annotators' marginals."""
    a = list(labels_a)
    b = list(labels_b)
    if len(a) != len(b):
        raise ValidationError(f"label lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise ValidationError("cannot compute agreement on empty lists")
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    labels = set(a) | set(b)
    p_e = sum((a.count(l) / n) * (b.count(l) / n) for l in labels)
    if p_e == 1.0:
        if p_o == 1.0:
            return 1.0
        raise ValidationError(
            "chance agreement is 1 with imperfect observed agreement; "
            "kappa is undefined"
        )
    return (p_o - p_e) / (1.0 - p_e)


KAPPA_BANDS = (
    (0.0, "no agreement"),
    (0.20, "slight agreement"),
    (0.40, "fair agreement"),
    (0.60, "moderate agreement"),
    (0.80, "substantial agreement"),
    (1.00, "almost perfect agreement"),
)


def kappa_band(kappa: float) -> str:
    """Conventional interpretation band for a kappa value."""
    if kappa > 1.0:
        raise ValidationError(f"kappa cannot exceed 1, got {kappa}")
    for upper, name in KAPPA_BANDS:
        if kappa <= upper:
            return name
    return KAPPA_BANDS[-1][1]


@dataclass
class StageTiming:
    name: str
    seconds: float
    input_size: int | None = None


@dataclass
class BenchmarkReport:
    perspective: str
    machine: str
    stages: list[StageTiming]

    @property
    def total_seconds(self) -> float:
        return sum(s.seconds for s in self.stages)

    def table(self, delimiter: str = "\t") -> str:
        lines = [f"# perspective: {self.perspective}", f"# machine: {self.machine}"]
        lines.append(delimiter.join(["stage", "seconds", "input_size"]))
        for stage in self.stages:
            size = "" if stage.input_size is None else str(stage.input_size)
            lines.append(delimiter.join([stage.name, f"{stage.seconds:.6f}", size]))
        lines.append(delimiter.join(["total", f"{self.total_seconds:.6f}", ""]))
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {
            "perspective": self.perspective,
            "machine": self.machine,
            "total_seconds": self.total_seconds,
            "stages": [
                {"name": s.name, "seconds": s.seconds, "input_size": s.input_size}
                for s in self.stages
            ],
        }


def machine_descriptor() -> str:
    return (
        f"{platform.platform()} | {platform.processor() or platform.machine()} | "
        f"python {platform.python_version()} | numpy {np.__version__}"
    )


def benchmark_runtime(stages, perspective: str = "user",
                      input_sizes: dict[str, int] | None = None) -> BenchmarkReport:
    """Time an ordered list of ``(name, zero-arg callable)`` stages.

    Each callable runs once; results flow between stages through whatever
    the callables close over. ``perspective`` distinguishes training runs
    ("developer") from inference runs ("user").
    """
    input_sizes = input_sizes or {}
    timings = []
    for name, fn in stages:
        start = time.perf_counter()
        fn()
        timings.append(
            StageTiming(name, time.perf_counter() - start, input_sizes.get(name))
        )
    return BenchmarkReport(perspective, machine_descriptor(), timings)


def save_metrics(summary: MetricsSummary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
