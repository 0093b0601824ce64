"""Figures for run reports, rendered off-screen to image files."""

from __future__ import annotations

from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from docgraph_mt.graph import DiscourseGraph  # noqa: E402
from docgraph_mt.runner.compare import ComparisonReport  # noqa: E402


def plot_comparison(report: ComparisonReport, path) -> Path:
    """Grouped bars of per-document d-BLEU and terminology accuracy for both runs."""
    path = Path(path)
    docs = [r.doc_id for r in report.rows]
    panels = [("d_bleu", "d-BLEU"), ("terminology_accuracy", "terminology accuracy")]
    fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 3.5))
    x = range(len(docs))
    width = 0.38
    for ax, (column, title) in zip(axes, panels):
        va = [r.a[column] or 0.0 for r in report.rows]
        vb = [r.b[column] or 0.0 for r in report.rows]
        ax.bar([i - width / 2 for i in x], va, width, label=report.label_a)
        ax.bar([i + width / 2 for i in x], vb, width, label=report.label_b)
        ax.set_xticks(list(x))
        ax.set_xticklabels(docs, rotation=45, ha="right", fontsize=8)
        ax.set_title(title)
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_relation_distances(graph: DiscourseGraph, path, near: int = 5) -> Path:
    """Histogram of edge distances |j - i|, with the near/far split marked."""
    path = Path(path)
    counts = Counter(e.distance for e in graph.edges)
    xs = list(range(1, graph.window + 1))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(xs, [counts.get(d, 0) for d in xs], color=["tab:blue" if d <= near else "tab:orange" for d in xs])
    ax.axvline(near + 0.5, color="grey", linestyle="--", linewidth=1)
    ax.set_xlabel("chunk distance")
    ax.set_ylabel("relations")
    ax.set_xticks(xs)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
