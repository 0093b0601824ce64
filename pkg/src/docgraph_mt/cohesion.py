"""LLM-as-judge cohesion evaluation for pronoun coreference and conjunctions.

Annotations are inline spans ``[surface]<key="value" ...>``. The judge first
annotates the source, then re-emits the annotated source with
``target_translation``, ``is_correct`` and ``error_type`` added to every span.
"""

from __future__ import annotations

import dataclasses
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Union

from docgraph_mt import prompts
from docgraph_mt.errors import (
    EmptyDocument,
    EmptySpanList,
    InvalidAttribute,
    MalformedSpan,
    MissingEvalAttrs,
)
from docgraph_mt.llm import ChatRequest, DecodingParams, Gateway

DIMENSIONS = ("coreference", "conjunction")

PRONOUN_TYPES = frozenset({"personal", "possessive", "demonstrative", "reflexive", "relative"})
CONJUNCTION_TYPES = frozenset(
    {"coordinating", "subordinating", "conjunctive_adverb", "transitional_phrase", "correlative"}
)
EVAL_KEYS = ("target_translation", "is_correct", "error_type")
_BASE_KEYS = {
    "coreference": ("type", "referent"),
    "conjunction": ("type", "relationship"),
}
KNOWN_ERROR_TYPES = {
    "coreference": frozenset({"null", "gender_mismatch", "wrong_referent", "missing_translation"}),
    "conjunction": frozenset(
        {"null", "wrong_conjunction", "missing_conjunction", "redundant_conjunction", "inappropriate_addition", "wrong_position"}
    ),
}

_ATTR = re.compile(r'\s*([A-Za-z_][A-Za-z0-9_]*)="([^"]*)"')


@dataclass(frozen=True)
class EvalAttrs:
    target_translation: str
    is_correct: bool
    error_type: str


@dataclass(frozen=True)
class AnnotationSpan:
    surface: str
    kind: str  # "pronoun" | "conjunction"
    attrs: dict
    eval_attrs: Optional[EvalAttrs] = None
    raw: str = field(default="", compare=False, repr=False)

    def render(self) -> str:
        items = list(self.attrs.items())
        if self.eval_attrs is not None:
            items += [
                ("target_translation", self.eval_attrs.target_translation),
                ("is_correct", "true" if self.eval_attrs.is_correct else "false"),
                ("error_type", self.eval_attrs.error_type),
            ]
        body = " ".join(f'{k}="{v}"' for k, v in items)
        return f"[{self.surface}]<{body}>"


Segment = Union[str, AnnotationSpan]


@dataclass
class AnnotatedText:
    segments: list[Segment]
    dimension: str

    @property
    def spans(self) -> list[AnnotationSpan]:
        return [s for s in self.segments if isinstance(s, AnnotationSpan)]

    @property
    def plain_text(self) -> str:
        return "".join(s if isinstance(s, str) else s.surface for s in self.segments)

    def render(self) -> str:
        return "".join(s if isinstance(s, str) else (s.raw or s.render()) for s in self.segments)


def _check_dimension(dimension: str) -> None:
    if dimension not in DIMENSIONS:
        raise ValueError(f"dimension must be one of {DIMENSIONS}, got {dimension!r}")


def _parse_attrs(body: str, where: int) -> dict:
    attrs: dict = {}
    pos = 0
    while pos < len(body):
        if body[pos:].strip() == "":
            break
        m = _ATTR.match(body, pos)
        if not m:
            raise MalformedSpan(f"bad attribute syntax at offset {where}: {body[pos:pos + 30]!r}")
        key, value = m.group(1), m.group(2)
        if key in attrs:
            raise InvalidAttribute(f"duplicate attribute {key!r} at offset {where}")
        attrs[key] = value
        pos = m.end()
    return attrs


def _build_span(surface: str, attrs: dict, dimension: str, expect_eval: bool, where: int) -> AnnotationSpan:
    allowed = set(_BASE_KEYS[dimension]) | set(EVAL_KEYS)
    unknown = set(attrs) - allowed
    if unknown:
        raise InvalidAttribute(f"unknown attribute(s) {sorted(unknown)} on [{surface}] at offset {where}")
    if "type" not in attrs:
        raise InvalidAttribute(f"[{surface}] at offset {where} has no type")
    valid_types = PRONOUN_TYPES if dimension == "coreference" else CONJUNCTION_TYPES
    if attrs["type"] not in valid_types:
        raise InvalidAttribute(f"[{surface}] type {attrs['type']!r} is not a valid {dimension} type")

    present = [k for k in EVAL_KEYS if k in attrs]
    eval_attrs = None
    if present:
        if len(present) != len(EVAL_KEYS):
            raise InvalidAttribute(f"[{surface}] at offset {where} has a partial evaluation ({present})")
        flag = attrs["is_correct"].strip().lower()
        if flag not in ("true", "false"):
            raise InvalidAttribute(f"[{surface}] is_correct must be true or false, got {attrs['is_correct']!r}")
        correct = flag == "true"
        target = attrs["target_translation"]
        if target == "omitted":
            if dimension == "conjunction":
                raise InvalidAttribute(f"[{surface}] conjunctions cannot be 'omitted'")
            if not correct:
                raise InvalidAttribute(f"[{surface}] an omitted pronoun must be marked correct")
        if target == "missing" and correct:
            raise InvalidAttribute(f"[{surface}] a missing translation must be marked incorrect")
        eval_attrs = EvalAttrs(target, correct, attrs["error_type"])
    elif expect_eval:
        raise MissingEvalAttrs(f"[{surface}] at offset {where} lacks evaluation attributes")

    base = {k: v for k, v in attrs.items() if k not in EVAL_KEYS}
    kind = "pronoun" if dimension == "coreference" else "conjunction"
    return AnnotationSpan(surface, kind, base, eval_attrs)


def parse_annotations(text: str, dimension: str, expect_eval_attrs: bool = False) -> AnnotatedText:
    """Split annotated text into plain segments and validated spans.

    A ``[`` only opens a span when its closing ``]`` is directly followed by
    ``<``; other brackets are ordinary text.
    """
    _check_dimension(dimension)
    segments: list[Segment] = []
    buf: list[str] = []
    pos = 0
    n = len(text)
    while pos < n:
        open_br = text.find("[", pos)
        if open_br < 0:
            buf.append(text[pos:])
            break
        close_br = text.find("]", open_br + 1)
        if close_br < 0 or close_br + 1 >= n or text[close_br + 1] != "<":
            buf.append(text[pos : open_br + 1])
            pos = open_br + 1
            continue
        surface = text[open_br + 1 : close_br]
        if "[" in surface or "<" in surface or ">" in surface:
            raise MalformedSpan(f"nested or overlapping annotation at offset {open_br}")
        if not surface.strip():
            raise MalformedSpan(f"empty annotated surface at offset {open_br}")
        end = _find_attr_end(text, close_br + 2)
        if end < 0:
            raise MalformedSpan(f"unterminated attribute block at offset {open_br}")
        attrs = _parse_attrs(text[close_br + 2 : end], open_br)
        buf.append(text[pos:open_br])
        if buf:
            joined = "".join(buf)
            if joined:
                segments.append(joined)
            buf = []
        span = _build_span(surface, attrs, dimension, expect_eval_attrs, open_br)
        segments.append(dataclasses.replace(span, raw=text[open_br : end + 1]))
        pos = end + 1
    tail = "".join(buf)
    if tail:
        segments.append(tail)
    return AnnotatedText(segments, dimension)


def _find_attr_end(text: str, start: int) -> int:
    """Index of the ``>`` closing an attribute block, skipping quoted values."""
    in_quote = False
    for k in range(start, len(text)):
        ch = text[k]
        if ch == '"':
            in_quote = not in_quote
        elif ch == ">" and not in_quote:
            return k
        elif ch in "[\n" and not in_quote:
            return -1
    return -1


def strip_annotations(text: str, dimension: str) -> str:
    return parse_annotations(text, dimension).plain_text


@dataclass
class CohesionScore:
    dimension: str
    total: int
    correct: int
    error_breakdown: dict[str, int] = field(default_factory=dict)
    unrecognized_error_types: list[str] = field(default_factory=list)
    anchor_mismatch: bool = False

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.total

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "error_breakdown": dict(self.error_breakdown),
            "unrecognized_error_types": list(self.unrecognized_error_types),
            "anchor_mismatch": self.anchor_mismatch,
        }


def score_cohesion(spans: list[AnnotationSpan]) -> CohesionScore:
    if not spans:
        raise EmptySpanList("no annotated spans to score")
    kinds = {s.kind for s in spans}
    if len(kinds) != 1:
        raise ValueError("spans mix pronouns and conjunctions")
    dimension = "coreference" if kinds == {"pronoun"} else "conjunction"
    if any(s.eval_attrs is None for s in spans):
        raise MissingEvalAttrs("every span needs evaluation attributes before scoring")
    correct = sum(s.eval_attrs.is_correct for s in spans)
    errors = Counter(s.eval_attrs.error_type for s in spans if not s.eval_attrs.is_correct)
    unknown = sorted(e for e in errors if e not in KNOWN_ERROR_TYPES[dimension])
    return CohesionScore(dimension, len(spans), correct, dict(sorted(errors.items())), unknown)


def build_annotation_prompt(source_doc: str, dimension: str) -> ChatRequest:
    _check_dimension(dimension)
    if not source_doc.strip():
        raise EmptyDocument("source document is empty")
    text = prompts.render(prompts.ANNOTATION_TEMPLATES[dimension], role=prompts.ROLE_DEFINITION, document=source_doc)
    return ChatRequest(text, tag="judge", decoding=_JUDGE_DECODING)


def build_evaluation_prompt(annotated_source: str, translation: str, dimension: str) -> ChatRequest:
    _check_dimension(dimension)
    parse_annotations(annotated_source, dimension)
    text = prompts.render(
        prompts.EVALUATION_TEMPLATES[dimension],
        role=prompts.ROLE_DEFINITION,
        annotated_source=annotated_source,
        translation=translation,
    )
    return ChatRequest(text, tag="judge", decoding=_JUDGE_DECODING)


_JUDGE_DECODING = DecodingParams(temperature=0.0, top_p=1.0, max_output_tokens=8192)

_FENCE = re.compile(r"^\s*```[^\n]*\n(.*?)\n?```\s*$", re.DOTALL)


def unwrap_judge_output(text: str) -> str:
    m = _FENCE.match(text)
    return m.group(1) if m else text.strip()


def _same_text(a: str, b: str) -> bool:
    return " ".join(a.split()) == " ".join(b.split())


def evaluate_cohesion(source_doc: str, translation: str, dimension: str, gateway: Gateway) -> CohesionScore:
    """Annotate, grade, parse and score one document on one dimension.

    If the judge's annotated text does not strip back to the source (whitespace
    differences aside) the score is returned with ``anchor_mismatch`` set.
    """
    annotated = unwrap_judge_output(gateway.complete(build_annotation_prompt(source_doc, dimension)).text)
    first = parse_annotations(annotated, dimension)
    graded = unwrap_judge_output(gateway.complete(build_evaluation_prompt(annotated, translation, dimension)).text)
    parsed = parse_annotations(graded, dimension, expect_eval_attrs=True)
    score = score_cohesion(parsed.spans)
    score.anchor_mismatch = not (_same_text(first.plain_text, source_doc) and _same_text(parsed.plain_text, source_doc))
    return score


def score_annotated_file(text: str, dimension: str) -> CohesionScore:
    """Score an already graded annotation without calling a judge."""
    return score_cohesion(parse_annotations(unwrap_judge_output(text), dimension, expect_eval_attrs=True).spans)


def write_cohesion_json(scores: dict[str, CohesionScore], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({dim: s.to_dict() for dim, s in scores.items()}, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


# --- heuristic judge used by the synthetic backend ------------------------------

_PRONOUNS = {
    "personal": ["he", "she", "it", "they", "him", "her", "them", "we", "us"],
    "possessive": ["his", "its", "their", "our"],
    "reflexive": ["himself", "herself", "itself", "themselves"],
}
_CONJUNCTIONS = {
    "coordinating": {"and": "addition", "but": "contrast", "so": "result", "or": "alternative"},
    "subordinating": {"because": "cause", "although": "concession", "if": "condition", "when": "time"},
    "conjunctive_adverb": {"however": "contrast", "therefore": "result", "then": "sequence"},
}


def _annotate_heuristically(document: str, dimension: str) -> str:
    if dimension == "coreference":
        table = {w: (t, "referent", "unresolved") for t, ws in _PRONOUNS.items() for w in ws}
    else:
        table = {w: (t, "relationship", rel) for t, ws in _CONJUNCTIONS.items() for w, rel in ws.items()}

    def sub(m: re.Match) -> str:
        word = m.group(0)
        kind, key, value = table[word.lower()]
        return f'[{word}]<type="{kind}" {key}="{value}">'

    pattern = re.compile(r"\b(" + "|".join(sorted(table, key=len, reverse=True)) + r")\b", re.IGNORECASE)
    return pattern.sub(sub, document)


def synthetic_judgement(prompt: str) -> str:
    head = prompt.split("\n", 1)[0]
    dimension = "coreference" if ("Pronoun" in head or "Reference" in head) else "conjunction"
    if "Annotation" in head:
        doc = prompts.fenced_block_after(prompt, "## Source document") or ""
        return _annotate_heuristically(doc, dimension)
    annotated = prompts.fenced_block_after(prompt, "## Annotated Source") or ""
    parsed = parse_annotations(annotated, dimension)
    out = []
    for seg in parsed.segments:
        if isinstance(seg, str):
            out.append(seg)
        else:
            out.append(AnnotationSpan(seg.surface, seg.kind, seg.attrs, EvalAttrs(seg.surface, True, "null")).render())
    return "".join(out)
