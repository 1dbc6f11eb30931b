"""Render regression and training results to files.

The report path of the CLI writes three artifacts per run: a delimited
per-pair table, the report JSON, and a matplotlib figure summarizing the
verdict split. Training emits a loss-curve figure next to its metrics.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .regression import RatingReport, format_percentage  # noqa: E402

VERDICT_LABELS = {"same": "same", "left_better": "left better",
                  "right_better": "right better"}


def write_pairs_csv(pair_records: list[dict], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "transcript_id", "auto_same", "divergence",
                         "left_turns", "right_turns"])
        for record in pair_records:
            writer.writerow([
                record["pair_id"], record["transcript_id"],
                "yes" if record["auto_same"] else "no",
                "" if record["divergence"] is None else record["divergence"],
                len(record["left"]["turns"]), len(record["right"]["turns"]),
            ])


def write_report_json(report: RatingReport, path: Path,
                      extra: dict | None = None) -> None:
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def render_report_figure(report: RatingReport, path: Path,
                         divergence_turns: list[int] | None = None) -> None:
    """Verdict split bar chart, with a divergence-turn histogram when known."""
    panels = 2 if divergence_turns else 1
    fig, axes = plt.subplots(1, panels, figsize=(4.5 * panels, 3.5))
    if panels == 1:
        axes = [axes]

    labels = [VERDICT_LABELS[v] for v in report.counts]
    counts = list(report.counts.values())
    bars = axes[0].bar(labels, counts, color=["#8c8c8c", "#2c7fb8", "#d95f0e"])
    for bar, verdict in zip(bars, report.counts):
        pct = format_percentage(report.percentages[verdict])
        axes[0].annotate(pct, xy=(bar.get_x() + bar.get_width() / 2,
                                  bar.get_height()),
                         ha="center", va="bottom", fontsize=9)
    axes[0].set_ylabel("rated pairs")
    title = "verdicts"
    if report.overall_variation is not None:
        title += f" (overall {report.overall_variation:+.2f}% for {report.candidate_side})"
    axes[0].set_title(title, fontsize=10)

    if divergence_turns:
        top = max(divergence_turns)
        axes[1].hist(divergence_turns, bins=range(0, top + 2), color="#2c7fb8",
                     rwidth=0.9, align="left")
        axes[1].set_xlabel("divergence turn")
        axes[1].set_ylabel("pairs")
        axes[1].set_title("where managers diverge", fontsize=10)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_training_curve(loss_history: list[float], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(range(1, len(loss_history) + 1), loss_history, color="#2c7fb8")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean step loss")
    ax.set_yscale("log")
    ax.set_title("training loss", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
