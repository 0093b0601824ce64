"""Side-by-side comparison of two runs over the same collection."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

from docgraph_mt.errors import CollectionMismatch
from docgraph_mt.runner.pipeline import load_run

COLUMNS = ("d_bleu", "terminology_accuracy", "calls", "total_tokens")


def _delta(a: Optional[float], b: Optional[float]) -> Optional[float]:
    return None if a is None or b is None else b - a


@dataclass
class ComparisonRow:
    doc_id: str
    a: dict[str, Optional[float]]
    b: dict[str, Optional[float]]

    @property
    def delta(self) -> dict[str, Optional[float]]:
        return {c: _delta(self.a[c], self.b[c]) for c in COLUMNS}


@dataclass
class ComparisonReport:
    label_a: str
    label_b: str
    rows: list[ComparisonRow] = field(default_factory=list)

    def mean(self, side: str, column: str) -> Optional[float]:
        values = [getattr(r, side)[column] for r in self.rows]
        values = [v for v in values if v is not None]
        return sum(values) / len(values) if values else None

    def mean_delta(self, column: str) -> Optional[float]:
        return _delta(self.mean("a", column), self.mean("b", column))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["document_id"]
        for c in COLUMNS:
            header += [f"{c}_a", f"{c}_b", f"{c}_delta"]
        writer.writerow(header)

        def fmt(v):
            return "" if v is None else f"{v:.6f}".rstrip("0").rstrip(".")

        for r in self.rows:
            line = [r.doc_id]
            for c in COLUMNS:
                line += [fmt(r.a[c]), fmt(r.b[c]), fmt(r.delta[c])]
            writer.writerow(line)
        line = ["MEAN"]
        for c in COLUMNS:
            line += [fmt(self.mean("a", c)), fmt(self.mean("b", c)), fmt(self.mean_delta(c))]
        writer.writerow(line)
        return buf.getvalue()


def _values(entry: dict) -> dict[str, Optional[float]]:
    metrics = entry.get("metrics", {})
    ledger = entry.get("ledger", {})
    return {
        "d_bleu": metrics.get("d_bleu"),
        "terminology_accuracy": metrics.get("terminology_accuracy"),
        "calls": ledger.get("calls"),
        "total_tokens": ledger.get("total_tokens"),
    }


def compare_runs(run_a, run_b) -> ComparisonReport:
    """Compare two run directories (or loaded manifests); deltas are b minus a."""
    a = run_a if isinstance(run_a, dict) else load_run(run_a)
    b = run_b if isinstance(run_b, dict) else load_run(run_b)
    if sorted(a["documents"]) != sorted(b["documents"]):
        raise CollectionMismatch(
            f"runs cover different documents: {sorted(a['documents'])} vs {sorted(b['documents'])}"
        )
    report = ComparisonReport(f"{a['strategy']} ({a['run_id']})", f"{b['strategy']} ({b['run_id']})")
    for doc_id in sorted(a["documents"]):
        report.rows.append(ComparisonRow(doc_id, _values(a["documents"][doc_id]), _values(b["documents"][doc_id])))
    return report
