"""Stage-2 translation: graph-neighbourhood context selection and per-chunk prompting."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from docgraph_mt import prompts
from docgraph_mt.chunker import Chunk
from docgraph_mt.errors import BackendRefusal, ChunkCountMismatch, LLMError, TranslationError
from docgraph_mt.graph import DiscourseGraph
from docgraph_mt.llm import ChatRequest, Gateway
from docgraph_mt.tokenize import is_cjk_language

logger = logging.getLogger(__name__)

DEFAULT_CONTEXT_CAP = 5
UNTRANSLATED_MARK = "[untranslated chunk {id}]"


@dataclass(frozen=True)
class ContextRecord:
    neighbor_id: int
    neighbor_text: str = ""
    label: Optional[str] = None
    reason: str = ""


@dataclass(frozen=True)
class ContextPackage:
    target_id: int
    records: tuple[ContextRecord, ...] = ()

    @property
    def neighbor_ids(self) -> list[int]:
        return [r.neighbor_id for r in self.records]


@dataclass(frozen=True)
class TranslatedChunk:
    chunk_id: int
    source_text: str
    target_text: str
    context: tuple[ContextRecord, ...] = ()
    failed: bool = False

    @property
    def context_ids(self) -> list[int]:
        return [r.neighbor_id for r in self.context]

    def to_dict(self) -> dict:
        record = {
            "chunk_id": self.chunk_id,
            "source_text": self.source_text,
            "target_text": self.target_text,
            "context": [{"neighbor_id": r.neighbor_id, "label": r.label} for r in self.context],
        }
        if self.failed:
            record["failed"] = True
        return record


@dataclass
class TranslatedDocument:
    text: str
    segments: list[TranslatedChunk] = field(default_factory=list)
    strategy: str = "transgraph"

    @property
    def failed_ids(self) -> list[int]:
        return [s.chunk_id for s in self.segments if s.failed]

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for seg in self.segments:
                fh.write(json.dumps(seg.to_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class TranslationConfig:
    src_lang: str = "en"
    tgt_lang: str = "zh"
    cap: int = DEFAULT_CONTEXT_CAP
    prefer: str = "nearest"  # or "earliest"
    on_error: str = "halt"  # or "skip"
    max_workers: int = 1
    max_retries: int = 2

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cap must be positive")
        if self.prefer not in ("nearest", "earliest"):
            raise ValueError("prefer must be 'nearest' or 'earliest'")
        if self.on_error not in ("halt", "skip"):
            raise ValueError("on_error must be 'halt' or 'skip'")


def _text_of(chunks: Optional[Sequence[Chunk]], cid: int) -> str:
    return chunks[cid - 1].content if chunks else ""


def in_neighbors(graph: DiscourseGraph, j: int, chunks: Optional[Sequence[Chunk]] = None) -> list[ContextRecord]:
    """Sources of directed edges into ``j``, plus earlier endpoints of symmetric edges touching ``j``.

    Symmetric edges are read as unordered, and only ever hand the earlier chunk
    to the later one, whichever direction was stored.
    """
    if not 1 <= j <= graph.n_chunks:
        raise ValueError(f"chunk id {j} outside 1..{graph.n_chunks}")
    found: dict[int, ContextRecord] = {}
    for e in graph.edges:
        if e.label.symmetric:
            if max(e.src, e.dst) != j:
                continue
            other = min(e.src, e.dst)
        elif e.dst == j:
            other = e.src
        else:
            continue
        if other not in found:
            found[other] = ContextRecord(other, _text_of(chunks, other), e.label.value, e.reason)
    return [found[i] for i in sorted(found)]


def select_context(
    graph: DiscourseGraph,
    j: int,
    cap: int = DEFAULT_CONTEXT_CAP,
    chunks: Optional[Sequence[Chunk]] = None,
    prefer: str = "nearest",
) -> ContextPackage:
    """At most ``cap`` in-neighbours of ``j``.

    Over the cap, "nearest" keeps the neighbours closest to ``j`` (smaller id on
    equal distance); "earliest" keeps the smallest ids. Records are returned in
    ascending id order either way.
    """
    if cap < 1:
        raise ValueError("cap must be positive")
    records = in_neighbors(graph, j, chunks)
    if len(records) > cap:
        if prefer == "nearest":
            ranked = sorted(records, key=lambda r: (abs(j - r.neighbor_id), r.neighbor_id))
        elif prefer == "earliest":
            ranked = sorted(records, key=lambda r: r.neighbor_id)
        else:
            raise ValueError(f"unknown preference {prefer!r}")
        records = sorted(ranked[:cap], key=lambda r: r.neighbor_id)
    return ContextPackage(j, tuple(records))


def render_translation_prompt(
    chunk: Chunk,
    ctx: ContextPackage,
    src_lang: str,
    tgt_lang: str,
    *,
    show_relations: bool = True,
) -> str:
    return prompts.render(
        prompts.TRANSLATION_TEMPLATE,
        src_lang=prompts.language_name(src_lang),
        tgt_lang=prompts.language_name(tgt_lang),
        related_chunks=prompts.format_related_chunks(ctx.records, show_relations=show_relations),
        chunk_id=chunk.id,
        chunk_text=chunk.content,
    )


def request_translation(gateway: Gateway, prompt: str, max_retries: int, what: str) -> str:
    """Issue a translate-stage call, retrying refusals; raises BackendRefusal when exhausted."""
    request = ChatRequest(prompt, tag="translate")
    for attempt in range(max_retries + 1):
        try:
            return gateway.complete(request).text.strip()
        except BackendRefusal as exc:
            logger.warning("%s: %s (attempt %d)", what, exc, attempt + 1)
            last = exc
    raise last


def translate_chunk(
    chunk: Chunk,
    ctx: ContextPackage,
    src_lang: str,
    tgt_lang: str,
    gateway: Gateway,
    *,
    show_relations: bool = True,
    max_retries: int = 2,
) -> TranslatedChunk:
    if ctx.target_id != chunk.id:
        raise ValueError("context package belongs to a different chunk")
    prompt = render_translation_prompt(chunk, ctx, src_lang, tgt_lang, show_relations=show_relations)
    try:
        text = request_translation(gateway, prompt, max_retries, f"chunk {chunk.id}")
    except LLMError as exc:
        raise TranslationError(f"chunk {chunk.id} could not be translated: {exc}", chunk.id) from exc
    return TranslatedChunk(chunk.id, chunk.content, text, ctx.records)


def join_segments(sources: Sequence[str], targets: Sequence[str], tgt_lang: str) -> str:
    """Concatenate translations in order, reusing each source segment's trailing break.

    A source segment ending in a newline keeps that whitespace; any other
    whitespace becomes one space, and segments with no trailing whitespace are
    glued for CJK targets and space-separated otherwise.
    """
    if not sources:
        return ""
    lead = sources[0][: len(sources[0]) - len(sources[0].lstrip())]
    parts = ["\n" * lead.count("\n")]
    last = len(sources) - 1
    for n, (src, tgt) in enumerate(zip(sources, targets)):
        parts.append(tgt)
        trailing = src[len(src.rstrip()) :]
        if "\n" in trailing:
            parts.append(trailing)
        elif n < last and (trailing or not is_cjk_language(tgt_lang)):
            parts.append(" ")
    return "".join(parts)


ContextSelector = Callable[[int], ContextPackage]


def translate_document(
    chunks: Sequence[Chunk],
    graph: Optional[DiscourseGraph],
    cfg: TranslationConfig,
    gateway: Gateway,
    *,
    selector: Optional[ContextSelector] = None,
    show_relations: bool = True,
    strategy: str = "transgraph",
) -> TranslatedDocument:
    """Translate chunks 1..N, each conditioned on its selected context package.

    ``selector`` overrides graph-based selection (used by the baselines). With
    ``on_error="skip"`` a failed chunk is replaced by a visible marker instead of
    aborting the document.
    """
    if graph is not None and graph.n_chunks != len(chunks):
        raise ChunkCountMismatch(f"graph has {graph.n_chunks} chunks, document has {len(chunks)}")
    if selector is None:
        if graph is None:
            raise ValueError("either a graph or a selector is required")
        selector = lambda j: select_context(graph, j, cfg.cap, chunks, cfg.prefer)  # noqa: E731

    def work(chunk: Chunk) -> TranslatedChunk:
        ctx = selector(chunk.id)
        try:
            return translate_chunk(
                chunk, ctx, cfg.src_lang, cfg.tgt_lang, gateway,
                show_relations=show_relations, max_retries=cfg.max_retries,
            )
        except TranslationError:
            if cfg.on_error == "halt":
                raise
            logger.error("chunk %d left untranslated", chunk.id)
            return TranslatedChunk(chunk.id, chunk.content, UNTRANSLATED_MARK.format(id=chunk.id), ctx.records, failed=True)

    if cfg.max_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            segments = list(pool.map(work, chunks))
    else:
        segments = [work(c) for c in chunks]
    text = join_segments([c.text for c in chunks], [s.target_text for s in segments], cfg.tgt_lang)
    return TranslatedDocument(text, segments, strategy)
