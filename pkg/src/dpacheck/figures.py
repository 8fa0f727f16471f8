"""Chart rendering for completeness reports and evaluation metrics.

Figures are written as PNG files next to the delimited text outputs so a
run directory is self-contained: a report directory holds the per-provision
table plus ``report.png``, an evaluation directory holds the metrics table
plus ``metrics.png``.  Rendering uses the Agg backend and never needs a
display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from dpacheck.checker import CompletenessReport
from dpacheck.eval import MetricsSummary

VIOLATED_COLOR = "#c0392b"
SATISFIED_COLOR = "#1e8449"
MICRO_COLOR = "#2e86c1"
MACRO_COLOR = "#884ea0"


def report_figure(report: CompletenessReport, path: str | Path) -> Path:
    """Render per-provision support counts as a horizontal bar chart.

    Satisfied provisions get a green bar sized by their support count;
    violated ones have no support, so they are flagged with a red
    "missing" marker and a red axis label instead of a bar.
    """
    ids = [v.provision_id for v in report.verdicts]
    counts = [len(v.supporting) for v in report.verdicts]
    colors = [SATISFIED_COLOR if v.satisfied else VIOLATED_COLOR
              for v in report.verdicts]

    height = max(2.5, 0.28 * len(ids) + 1.2)
    fig, ax = plt.subplots(figsize=(8, height))
    positions = list(range(len(ids)))
    ax.barh(positions, counts, color=colors)
    ax.set_yticks(positions, labels=ids)
    ax.invert_yaxis()
    for label, verdict in zip(ax.get_yticklabels(), report.verdicts):
        label.set_color(SATISFIED_COLOR if verdict.satisfied else VIOLATED_COLOR)
    for y, verdict in zip(positions, report.verdicts):
        if not verdict.satisfied:
            ax.text(0.05, y, "missing", color=VIOLATED_COLOR,
                    va="center", fontsize=8, style="italic")

    ax.set_xlabel("supporting sentences")
    status = ("complete" if report.complete
              else f"{report.violation_count} violation(s)")
    ax.set_title(f"{report.dpa_id}: {status}")
    ax.set_xlim(left=0)
    fig.tight_layout()

    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def metrics_figure(summary: MetricsSummary, path: str | Path) -> Path:
    """Render per-provision F-beta as a bar chart with micro/macro lines.

    Provisions whose F-beta is undefined (flagged in the summary) are drawn
    hatched so a zero from an undefined ratio is distinguishable from a
    genuine zero score.
    """
    ids = list(summary.per_provision)
    scores = [summary.per_provision[p].fbeta for p in ids]
    hatches = ["//" if "fbeta" in summary.per_provision[p].undefined else ""
               for p in ids]

    width = max(4.0, 0.45 * len(ids) + 1.5)
    fig, ax = plt.subplots(figsize=(width, 4.5))
    bars = ax.bar(range(len(ids)), scores, color=SATISFIED_COLOR)
    for bar, hatch in zip(bars, hatches):
        bar.set_hatch(hatch)
    ax.set_xticks(range(len(ids)), labels=ids, rotation=90, fontsize=8)
    ax.set_ylim(0.0, 1.05)
    label = f"F{summary.beta:g}"
    ax.set_ylabel(label)
    ax.axhline(summary.micro.fbeta, color=MICRO_COLOR, linestyle="--",
               linewidth=1.2, label=f"micro {label} = {summary.micro.fbeta:.3f}")
    ax.axhline(summary.macro.fbeta, color=MACRO_COLOR, linestyle=":",
               linewidth=1.2, label=f"macro {label} = {summary.macro.fbeta:.3f}")
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title(f"per-provision {label}")
    fig.tight_layout()

    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
