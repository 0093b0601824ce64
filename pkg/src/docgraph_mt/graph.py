"""Stage-1 discourse graph: pair enumeration, LLM relation labelling, graph assembly."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from docgraph_mt import prompts
from docgraph_mt.chunker import Chunk
from docgraph_mt.errors import ChunkCountMismatch, LLMError, StructureError, UnknownLabel
from docgraph_mt.llm import ChatRequest, Gateway, StructuredShape

logger = logging.getLogger(__name__)

DEFAULT_PAIR_WINDOW = 10
NO_RELATION_REASON = "no relation found"


class RelationLabel(str, Enum):
    BACKGROUND_CORE = "background_core"
    CORE_DETAIL = "core_detail"
    PROBLEM_SOLUTION = "problem_solution"
    CAUSE_EFFECT = "cause_effect"
    CONTRAST = "contrast"
    COMPARISON = "comparison"
    CONDITION = "condition"
    EVALUATION = "evaluation"
    ENTITY_COREFERENCE = "entity_coreference"
    TERMINOLOGY_DEFINITION = "terminology_definition"

    @property
    def symmetric(self) -> bool:
        return self in SYMMETRIC_LABELS

    def __str__(self) -> str:
        return self.value


SYMMETRIC_LABELS = frozenset(
    {RelationLabel.CONTRAST, RelationLabel.COMPARISON, RelationLabel.ENTITY_COREFERENCE}
)

_ALIASES = {
    "motivation_method": RelationLabel.PROBLEM_SOLUTION,
    "motivation_method_or_problem_solution": RelationLabel.PROBLEM_SOLUTION,
    "problem_solution_or_motivation_method": RelationLabel.PROBLEM_SOLUTION,
    "coreference": RelationLabel.ENTITY_COREFERENCE,
    "terminology": RelationLabel.TERMINOLOGY_DEFINITION,
    "definition": RelationLabel.TERMINOLOGY_DEFINITION,
}
_NONE_SPELLINGS = {"", "none", "no_relation", "no", "null", "n_a", "na", "no_relation_found", "unrelated"}


def normalize_label(text: str) -> Optional[RelationLabel]:
    """Map an LLM label spelling to the schema; ``None`` means no relation."""
    s = str(text).strip().strip("*`'\" ").lower()
    s = re.sub(r"\s*(?:->|→|=>|⇒|—>|–>)\s*", "_", s)
    s = re.sub(r"[\s\-/]+", "_", s)
    s = re.sub(r"_+", "_", s).strip("_")
    if s in _NONE_SPELLINGS:
        return None
    try:
        return RelationLabel(s)
    except ValueError:
        pass
    if s in _ALIASES:
        return _ALIASES[s]
    raise UnknownLabel(f"relation {text!r} is not in the label schema")


@dataclass(frozen=True)
class RelationJudgment:
    reason: str
    relation: Optional[RelationLabel]
    direction: str = "forward"

    @property
    def is_none(self) -> bool:
        return self.relation is None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    label: RelationLabel
    reason: str = ""

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("self-loops are not allowed")

    @property
    def direction(self) -> str:
        return "forward" if self.src < self.dst else "backward"

    @property
    def distance(self) -> int:
        return abs(self.dst - self.src)

    def canonical(self) -> tuple[int, int, RelationLabel]:
        if self.label.symmetric:
            return (min(self.src, self.dst), max(self.src, self.dst), self.label)
        return (self.src, self.dst, self.label)

    def to_dict(self) -> dict:
        return {
            "src": self.src,
            "dst": self.dst,
            "label": self.label.value,
            "direction": self.direction,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class DiscourseGraph:
    n_chunks: int
    edges: tuple[Edge, ...] = ()
    window: int = DEFAULT_PAIR_WINDOW
    failed_pairs: tuple[tuple[int, int], ...] = field(default=(), compare=False)

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            if not (1 <= e.src <= self.n_chunks and 1 <= e.dst <= self.n_chunks):
                raise ValueError(f"edge {e.src}->{e.dst} outside 1..{self.n_chunks}")
            if (e.src, e.dst) in seen:
                raise ValueError(f"duplicate edge {e.src}->{e.dst}")
            seen.add((e.src, e.dst))

    def relation_set(self) -> frozenset[tuple[int, int, RelationLabel]]:
        return frozenset(e.canonical() for e in self.edges)

    def to_dict(self) -> dict:
        return {
            "n_chunks": self.n_chunks,
            "window": self.window,
            "edges": [e.to_dict() for e in self.edges],
            "failed_pairs": [list(p) for p in self.failed_pairs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscourseGraph":
        edges = tuple(
            Edge(int(e["src"]), int(e["dst"]), RelationLabel(e["label"]), e.get("reason", ""))
            for e in data["edges"]
        )
        failed = tuple(tuple(p) for p in data.get("failed_pairs", ()))
        return cls(int(data["n_chunks"]), edges, int(data.get("window", DEFAULT_PAIR_WINDOW)), failed)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DiscourseGraph":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def enumerate_pairs(N: int, w: int) -> list[tuple[int, int]]:
    if N < 0 or w < 1:
        raise ValueError("need N >= 0 and w >= 1")
    return [(i, j) for i in range(1, N + 1) for j in range(i + 1, min(i + w, N) + 1)]


def render_relation_prompt(i: int, chunk_i: str, j: int, chunk_j: str) -> str:
    return prompts.render(prompts.RELATION_TEMPLATE, i=i, j=j, chunk_i=chunk_i, chunk_j=chunk_j)


def _check_relation_payload(payload: dict) -> dict:
    direction = str(payload.get("direction", "forward") or "forward").strip().lower()
    try:
        unrelated = normalize_label(str(payload.get("relation") or "none")) is None
    except UnknownLabel:
        unrelated = False
    if unrelated:
        direction = "forward"
    if direction not in ("forward", "backward"):
        raise StructureError(f"direction must be 'forward' or 'backward', got {direction!r}")
    return {
        "reason": str(payload.get("reason", "") or ""),
        "relation": str(payload.get("relation") or "none"),
        "direction": direction,
    }


_RELATION_SHAPE = StructuredShape(
    required={"relation": None},
    validate=_check_relation_payload,
    description="a dictionary with keys reason, relation, direction",
)

_LABEL_CHOICES = ", ".join(label.value for label in RelationLabel)


def _judgment(payload: dict) -> RelationJudgment:
    label = normalize_label(payload["relation"])
    if label is None:
        return RelationJudgment(NO_RELATION_REASON, None, payload["direction"])
    return RelationJudgment(payload["reason"], label, payload["direction"])


def label_pair(
    c_i: Chunk,
    c_j: Chunk,
    gateway: Gateway,
    max_retries: Optional[int] = None,
) -> RelationJudgment:
    """Judge the relation between an earlier chunk ``c_i`` and a later chunk ``c_j``.

    An unmappable label earns one repair request listing the allowed values;
    if that answer is still unmappable the pair counts as unrelated.
    """
    i, j = c_i.id, c_j.id
    if not i < j:
        raise ValueError("label_pair expects c_i.id < c_j.id")
    request = ChatRequest(render_relation_prompt(i, c_i.content, j, c_j.content), tag="relation")
    payload = gateway.complete_structured(request, _RELATION_SHAPE, max_retries)
    try:
        return _judgment(payload)
    except UnknownLabel as exc:
        note = f"The relation {payload['relation']!r} is not allowed. Use exactly one of: {_LABEL_CHOICES}, or 'none'. Reply with only the dictionary."
        payload = gateway.complete_structured(request.with_repair(note), _RELATION_SHAPE, max_retries)
        try:
            return _judgment(payload)
        except UnknownLabel:
            logger.warning("pair (%d, %d): %s after repair; treating as no relation", i, j, exc)
            return RelationJudgment(NO_RELATION_REASON, None, payload["direction"])


def resolve_direction(judgment: RelationJudgment, i: int, j: int) -> Optional[Edge]:
    if judgment.relation is None:
        return None
    if judgment.direction == "backward":
        return Edge(j, i, judgment.relation, judgment.reason)
    return Edge(i, j, judgment.relation, judgment.reason)


def build_graph(
    chunks: Sequence[Chunk],
    gateway: Gateway,
    w: int = DEFAULT_PAIR_WINDOW,
    *,
    max_workers: int = 1,
    max_retries: Optional[int] = None,
) -> DiscourseGraph:
    """Label every forward pair within distance ``w``; a failing pair adds no edge."""
    N = len(chunks)
    for n, chunk in enumerate(chunks, 1):
        if chunk.id != n:
            raise ValueError("chunk ids must be 1..N in order")
    pairs = enumerate_pairs(N, w)

    def judge(pair: tuple[int, int]):
        i, j = pair
        try:
            return label_pair(chunks[i - 1], chunks[j - 1], gateway, max_retries)
        except LLMError as exc:
            logger.warning("pair (%d, %d) failed: %s", i, j, exc)
            return exc

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(judge, pairs))
    else:
        results = [judge(p) for p in pairs]

    edges = []
    failed = []
    for (i, j), result in zip(pairs, results):
        if isinstance(result, Exception):
            failed.append((i, j))
            continue
        edge = resolve_direction(result, i, j)
        if edge is not None:
            edges.append(edge)
    return DiscourseGraph(N, tuple(edges), w, tuple(failed))


def graph_consistency(a: DiscourseGraph, b: DiscourseGraph) -> float:
    """Jaccard overlap of canonical relation sets (symmetric labels unordered)."""
    if a.n_chunks != b.n_chunks:
        raise ChunkCountMismatch(f"graphs cover {a.n_chunks} and {b.n_chunks} chunks")
    sa, sb = a.relation_set(), b.relation_set()
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def near_relation_ratio(graph: DiscourseGraph, k: int = 5) -> Optional[float]:
    """Share of edges whose endpoints are at most ``k`` chunks apart (None if no edges)."""
    if not graph.edges:
        return None
    return sum(1 for e in graph.edges if e.distance <= k) / len(graph.edges)


# --- relation accuracy against a user-supplied gold set -----------------------


@dataclass(frozen=True)
class GoldRelation:
    chunk_i: str
    chunk_j: str
    relation: Optional[RelationLabel]


def load_relation_gold(path) -> list[GoldRelation]:
    """Read JSONL records ``{chunk_i, chunk_j, relation}`` (relation may be "none")."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out.append(GoldRelation(rec["chunk_i"], rec["chunk_j"], normalize_label(rec["relation"])))
    return out


def relation_accuracy(samples: Iterable[GoldRelation], gateway: Gateway) -> float:
    """Fraction of gold pairs whose predicted label matches (pairs scored as chunks 1 and 2)."""
    samples = list(samples)
    if not samples:
        raise ValueError("no gold samples")
    hits = 0
    for s in samples:
        try:
            c_i = Chunk(1, (0,), s.chunk_i, 0)
            c_j = Chunk(2, (1,), s.chunk_j, 0)
            predicted = label_pair(c_i, c_j, gateway).relation
        except LLMError:
            predicted = "failed"
        hits += predicted == s.relation
    return hits / len(samples)


# --- DOT export ---------------------------------------------------------------


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph_dot(graph: DiscourseGraph, name: str = "discourse") -> str:
    lines = [f"digraph {name} {{", "  node [shape=box];"]
    for n in range(1, graph.n_chunks + 1):
        lines.append(f"  c{n} [label={_dot_quote(f'Chunk {n}')}];")
    for e in graph.edges:
        attrs = f"label={_dot_quote(e.label.value)}"
        if e.label.symmetric:
            attrs += ", dir=both"
        lines.append(f"  c{e.src} -> c{e.dst} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
