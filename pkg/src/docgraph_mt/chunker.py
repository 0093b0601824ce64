"""Stage-1 chunking: LLM-guided grouping of sentences over bounded token windows."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from docgraph_mt import prompts
from docgraph_mt.errors import CoverageError, StructureError
from docgraph_mt.llm import ChatRequest, Gateway, StructuredShape
from docgraph_mt.segment import Sentence, segment_sentences
from docgraph_mt.tokenize import Tokenizer, default_tokenize

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_TOKENS = 100


@dataclass(frozen=True)
class Chunk:
    """A contiguous run of sentences.

    ``text`` is the exact document slice the chunk owns: it runs from its first
    sentence up to the next chunk's first sentence, so it carries the trailing
    whitespace (and the first chunk carries any leading whitespace). Joining all
    chunk texts in id order therefore reproduces the document.
    """

    id: int
    sentence_indices: tuple[int, ...]
    text: str
    token_count: int
    rationale: str = ""

    @property
    def content(self) -> str:
        return self.text.strip()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "sentence_indices": list(self.sentence_indices),
            "text": self.text,
            "token_count": self.token_count,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Chunk":
        return cls(
            int(data["id"]),
            tuple(int(i) for i in data["sentence_indices"]),
            data["text"],
            int(data["token_count"]),
            data.get("rationale", ""),
        )


@dataclass(frozen=True)
class ProposalEntry:
    chunk_id: str
    rationale: str
    sentence_indices: tuple[int, ...]
    carry_over: bool = False


@dataclass(frozen=True)
class ChunkProposal:
    chunks: tuple[ProposalEntry, ...]


@dataclass(frozen=True)
class WindowSlice:
    sentences: tuple[Sentence, ...]
    carry_count: int
    cursor: int
    is_final: bool

    def __bool__(self) -> bool:
        return bool(self.sentences)

    @property
    def token_count(self) -> int:
        return sum(s.token_count for s in self.sentences)


def take_window(
    sentences: Sequence[Sentence],
    cursor: int,
    T: int,
    carry: Sequence[Sentence] = (),
) -> WindowSlice:
    """Carry-over sentences followed by whole sentences from ``cursor`` until their
    token count first reaches ``T`` (at least one new sentence when any remain)."""
    if T < 1:
        raise ValueError("T must be positive")
    if cursor > len(sentences):
        raise ValueError("cursor beyond the end of the document")
    taken: list[Sentence] = []
    total = 0
    pos = cursor
    while pos < len(sentences) and (not taken or total < T):
        taken.append(sentences[pos])
        total += sentences[pos].token_count
        pos += 1
    return WindowSlice(tuple(carry) + tuple(taken), len(carry), pos, pos == len(sentences))


def render_chunking_prompt(window: WindowSlice) -> str:
    lines = [f"[{k}] {s.text}" for k, s in enumerate(window.sentences)]
    return prompts.render(prompts.CHUNKING_TEMPLATE, chunk_content="\n".join(lines))


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "false"):
        return value.strip().lower() == "true"
    if value is None:
        return False
    raise StructureError(f"carry_over must be a boolean, got {value!r}")


def _as_indices(value) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise StructureError("sentence_indices must be a list")
    out = []
    for v in value:
        if isinstance(v, bool):
            raise StructureError("sentence index must be an integer")
        try:
            out.append(int(v))
        except (TypeError, ValueError):
            raise StructureError(f"sentence index {v!r} is not an integer") from None
    return tuple(out)


def validate_proposal(payload: dict, n_sentences: int) -> ChunkProposal:
    """Check a window-local proposal and return it unchanged in local indices."""
    raw = payload.get("chunks")
    if not isinstance(raw, list) or not raw:
        raise CoverageError("proposal contains no chunks")
    entries = []
    for n, item in enumerate(raw):
        if not isinstance(item, dict):
            raise StructureError(f"chunk entry {n} is not an object")
        indices = _as_indices(item.get("sentence_indices"))
        if not indices:
            raise CoverageError(f"chunk entry {n} has no sentences")
        if any(b != a + 1 for a, b in zip(indices, indices[1:])):
            raise StructureError(f"chunk entry {n} is not a contiguous ascending run: {list(indices)}")
        entries.append(
            ProposalEntry(
                str(item.get("chunk_id", n + 1)),
                str(item.get("rationale", "")),
                indices,
                _as_bool(item.get("carry_over", False)),
            )
        )
    if any(e.carry_over for e in entries[:-1]):
        raise StructureError("only the final chunk may be marked carry_over")
    flat = [i for e in entries for i in e.sentence_indices]
    if len(set(flat)) != len(flat):
        raise CoverageError(f"proposal assigns a sentence twice: {flat}")
    if flat != list(range(n_sentences)):
        missing = sorted(set(range(n_sentences)) - set(flat))
        extra = sorted(set(flat) - set(range(n_sentences)))
        if missing or extra:
            raise CoverageError(f"proposal coverage is wrong (missing {missing}, unknown {extra})")
        raise CoverageError(f"proposal chunks are out of document order: {flat}")
    return ChunkProposal(tuple(entries))


def chunk_window(window: WindowSlice, gateway: Gateway, max_retries: Optional[int] = None) -> ChunkProposal:
    """Ask the LLM to group a window's sentences; indices come back document-global."""
    if not window:
        raise ValueError("window is empty")
    n = len(window.sentences)
    shape = StructuredShape(
        required={"chunks": list},
        validate=lambda payload: validate_proposal(payload, n),
        description='a JSON object {"chunks": [...]} whose chunks cover every listed sentence index exactly once, in order',
    )
    request = ChatRequest(render_chunking_prompt(window), tag="chunk")
    local = gateway.complete_structured(request, shape, max_retries)
    to_global = [s.index for s in window.sentences]
    return ChunkProposal(
        tuple(
            ProposalEntry(e.chunk_id, e.rationale, tuple(to_global[i] for i in e.sentence_indices), e.carry_over)
            for e in local.chunks
        )
    )


def build_chunks(
    document: str,
    sentences: Sequence[Sentence],
    groups: Iterable[Sequence[int]],
    rationales: Optional[Sequence[str]] = None,
) -> list[Chunk]:
    """Materialise chunks from contiguous sentence-index groups covering all sentences."""
    groups = [tuple(g) for g in groups]
    flat = [i for g in groups for i in g]
    if flat != list(range(len(sentences))):
        raise CoverageError(f"groups do not partition the sentences in order: {flat}")
    starts = [sentences[g[0]].char_span[0] for g in groups]
    starts[0] = 0
    ends = starts[1:] + [len(document)]
    chunks = []
    for n, g in enumerate(groups):
        chunks.append(
            Chunk(
                id=n + 1,
                sentence_indices=g,
                text=document[starts[n] : ends[n]],
                token_count=sum(sentences[i].token_count for i in g),
                rationale=rationales[n] if rationales else "",
            )
        )
    return chunks


@dataclass
class ChunkingTrace:
    """Bookkeeping from one chunk_document run."""

    windows: int = 0
    fallbacks: list[int] = field(default_factory=list)


def chunk_document(
    document: str,
    gateway: Gateway,
    T: int = DEFAULT_WINDOW_TOKENS,
    *,
    language: str = "en",
    tokenizer: Tokenizer = default_tokenize,
    sentences: Optional[Sequence[Sentence]] = None,
    max_retries: Optional[int] = None,
    trace: Optional[ChunkingTrace] = None,
) -> list[Chunk]:
    if T < 1:
        raise ValueError("T must be positive")
    if sentences is None:
        sentences = segment_sentences(document, language, tokenizer)
    groups: list[tuple[int, ...]] = []
    rationales: list[str] = []
    cursor = 0
    carry: tuple[Sentence, ...] = ()
    n_windows = 0
    while True:
        window = take_window(sentences, cursor, T, carry)
        if not window:
            break
        n_windows += 1
        cursor = window.cursor
        try:
            proposal = chunk_window(window, gateway, max_retries)
        except StructureError as exc:
            logger.warning("chunking window %d failed (%s); using the whole window as one chunk", n_windows, exc)
            if trace is not None:
                trace.fallbacks.append(n_windows)
            proposal = ChunkProposal(
                (ProposalEntry("fallback", "window kept whole after repeated invalid proposals", tuple(s.index for s in window.sentences)),)
            )
        entries = list(proposal.chunks)
        carry = ()
        if entries[-1].carry_over and not window.is_final:
            carry = tuple(sentences[i] for i in entries.pop().sentence_indices)
        for entry in entries:
            groups.append(entry.sentence_indices)
            rationales.append(entry.rationale)
    if trace is not None:
        trace.windows = n_windows
    return build_chunks(document, sentences, groups, rationales)


def write_chunks_jsonl(chunks: Iterable[Chunk], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk.to_dict(), ensure_ascii=False) + "\n")


def read_chunks_jsonl(path) -> list[Chunk]:
    with open(path, encoding="utf-8") as fh:
        return [Chunk.from_dict(json.loads(line)) for line in fh if line.strip()]


__all__ = [
    "Chunk",
    "ChunkProposal",
    "ChunkingTrace",
    "ProposalEntry",
    "Sentence",
    "WindowSlice",
    "build_chunks",
    "chunk_document",
    "chunk_window",
    "read_chunks_jsonl",
    "segment_sentences",
    "take_window",
    "validate_proposal",
    "write_chunks_jsonl",
]
