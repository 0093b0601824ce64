"""Deterministic evaluation metrics: d-BLEU, terminology accuracy, chunk overlap, cost."""

from __future__ import annotations

import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from docgraph_mt.chunker import Chunk
from docgraph_mt.errors import EmptyReference, NoTerms, ParseError, PartitionMismatch, UnknownDocument
from docgraph_mt.llm import CostLedger
from docgraph_mt.tokenize import Tokenizer, contains_cjk, get_tokenizer

BLEU_SMOOTHING = "add-one on zero n-gram matches for n>=2"


@dataclass(frozen=True)
class TermPair:
    source_term: str
    target_term: str

    def __post_init__(self):
        if not self.source_term.strip() or not self.target_term.strip():
            raise ValueError("term pairs need non-empty source and target terms")


@dataclass
class BleuStats:
    score: float
    precisions: list[float]
    matches: list[int]
    totals: list[int]
    brevity_penalty: float
    hyp_len: int
    ref_len: int


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[k : k + n]) for k in range(len(tokens) - n + 1))


def bleu_stats(hyp_tokens: Sequence[str], ref_tokens: Sequence[str], max_n: int = 4) -> BleuStats:
    if not ref_tokens:
        raise EmptyReference("reference has no tokens")
    matches, totals, precisions = [], [], []
    for n in range(1, max_n + 1):
        hyp_counts = _ngrams(hyp_tokens, n)
        ref_counts = _ngrams(ref_tokens, n)
        match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        total = max(len(hyp_tokens) - n + 1, 0)
        matches.append(match)
        totals.append(total)
        if match == 0 and n >= 2:
            precisions.append(1.0 / (total + 1))
        elif total == 0:
            precisions.append(0.0)
        else:
            precisions.append(match / total)
    h, r = len(hyp_tokens), len(ref_tokens)
    if h == 0 or min(precisions) == 0.0:
        return BleuStats(0.0, precisions, matches, totals, 0.0 if h == 0 else 1.0, h, r)
    bp = 1.0 if h >= r else math.exp(1 - r / h)
    log_mean = sum(math.log(p) for p in precisions) / max_n
    return BleuStats(100.0 * bp * math.exp(log_mean), precisions, matches, totals, bp, h, r)


def d_bleu(
    hypothesis_doc: str,
    reference_doc: str,
    max_n: int = 4,
    tokenizer: str | Tokenizer = "default",
) -> float:
    """BLEU over the whole document treated as a single segment, in [0, 100]."""
    tok = get_tokenizer(tokenizer) if isinstance(tokenizer, str) else tokenizer
    ref_tokens = tok(reference_doc)
    if not reference_doc.strip() or not ref_tokens:
        raise EmptyReference("reference document is empty")
    return bleu_stats(tok(hypothesis_doc), ref_tokens, max_n).score


def _normalize(text: str) -> str:
    return re.sub(r"\s+", " ", unicodedata.normalize("NFKC", text)).casefold().strip()


def term_present(hypothesis: str, term: str) -> bool:
    hyp = _normalize(hypothesis)
    needle = _normalize(term)
    if contains_cjk(needle):
        return needle in hyp
    return re.search(rf"(?<!\w){re.escape(needle)}(?!\w)", hyp) is not None


def terminology_accuracy(hypothesis_doc: str, terms: Sequence[TermPair]) -> float:
    if not terms:
        raise NoTerms("no term pairs supplied")
    return sum(term_present(hypothesis_doc, t.target_term) for t in terms) / len(terms)


def read_terms(path) -> list[TermPair]:
    """Load JSONL ``{source_term, target_term}`` records."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(TermPair(rec["source_term"], rec["target_term"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad term record ({exc})") from None
    return out


def chunk_overlap_rate(a: Sequence[Chunk], b: Sequence[Chunk]) -> float:
    """Mean over chunks of ``a`` of |overlap| / max(size) against their best-overlapping chunk in ``b``.

    The best match is the ``b`` chunk sharing the most sentences, ties going to
    the earliest one.
    """
    sets_a = [set(c.sentence_indices) for c in a]
    sets_b = [set(c.sentence_indices) for c in b]
    all_a = set().union(*sets_a) if sets_a else set()
    all_b = set().union(*sets_b) if sets_b else set()
    if not sets_a or all_a != all_b or sum(map(len, sets_a)) != len(all_a) or sum(map(len, sets_b)) != len(all_b):
        raise PartitionMismatch("chunkings do not partition the same sentence set")
    scores = []
    for sa in sets_a:
        best, best_overlap = None, -1
        for sb in sets_b:
            overlap = len(sa & sb)
            if overlap > best_overlap:
                best, best_overlap = sb, overlap
        scores.append(best_overlap / max(len(sa), len(best)))
    return sum(scores) / len(scores)


@dataclass(frozen=True)
class CostReport:
    avg_input_tokens: float
    avg_output_tokens: float
    avg_calls: float
    avg_total_tokens: float

    def to_dict(self) -> dict:
        return {
            "avg_input_tokens": self.avg_input_tokens,
            "avg_output_tokens": self.avg_output_tokens,
            "avg_calls": self.avg_calls,
            "avg_total_tokens": self.avg_total_tokens,
        }


def cost_report(ledger: CostLedger, n_documents: int = 1) -> CostReport:
    """Per-call token averages plus per-document call and token totals."""
    if n_documents < 1:
        raise ValueError("n_documents must be >= 1")
    if ledger.calls == 0:
        return CostReport(0.0, 0.0, 0.0, 0.0)
    return CostReport(
        ledger.input_tokens / ledger.calls,
        ledger.output_tokens / ledger.calls,
        ledger.calls / n_documents,
        ledger.total_tokens() / n_documents,
    )


def read_external_scores(path, known_documents: Optional[Iterable[str]] = None) -> dict[str, dict[str, float]]:
    """Parse JSONL ``{metric_name, document_id, score}`` into ``{document_id: {metric: score}}``."""
    known = set(known_documents) if known_documents is not None else None
    out: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                name = rec["metric_name"]
                doc = str(rec["document_id"])
                score = rec["score"]
                if not isinstance(name, str) or not name or isinstance(score, bool) or not isinstance(score, (int, float)):
                    raise TypeError("metric_name must be text and score a number")
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed score record ({exc})") from None
            if known is not None and doc not in known:
                raise UnknownDocument(f"{path}:{lineno}: unknown document {doc!r}")
            out.setdefault(doc, {})[name] = float(score)
    return out


def ingest_external_scores(path, known_documents: Optional[Iterable[str]] = None) -> dict[str, float]:
    """Externally computed scores averaged per metric over the documents in the file."""
    per_doc = read_external_scores(path, known_documents)
    sums: dict[str, list[float]] = {}
    for scores in per_doc.values():
        for name, value in scores.items():
            sums.setdefault(name, []).append(value)
    return {name: sum(v) / len(v) for name, v in sorted(sums.items())}


@dataclass
class MetricsReport:
    d_bleu: Optional[float] = None
    terminology_accuracy: Optional[float] = None
    external_scores: dict[str, float] = field(default_factory=dict)
    cost: Optional[CostLedger] = None
    bleu_smoothing: str = BLEU_SMOOTHING
    bleu_tokenizer: str = "default"

    def to_dict(self) -> dict:
        out: dict = {}
        if self.d_bleu is not None:
            out["d_bleu"] = self.d_bleu
            out["bleu_smoothing"] = self.bleu_smoothing
            out["bleu_tokenizer"] = self.bleu_tokenizer
        if self.terminology_accuracy is not None:
            out["terminology_accuracy"] = self.terminology_accuracy
            out["terminology_accuracy_pct"] = 100.0 * self.terminology_accuracy
        if self.external_scores:
            out["external_scores"] = dict(self.external_scores)
        if self.cost is not None:
            out["cost"] = self.cost.to_dict()
            out["cost_report"] = cost_report(self.cost, 1).to_dict()
        return out
