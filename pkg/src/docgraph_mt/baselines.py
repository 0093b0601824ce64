"""Comparison strategies: sentence-level, single-pass, fixed chunking, and context ablations."""

from __future__ import annotations

from enum import Enum
from typing import Optional, Sequence

from docgraph_mt import prompts
from docgraph_mt.chunker import Chunk, build_chunks
from docgraph_mt.errors import LLMError, TranslationError
from docgraph_mt.graph import DiscourseGraph
from docgraph_mt.llm import ChatRequest, Gateway
from docgraph_mt.segment import Sentence, segment_sentences
from docgraph_mt.tokenize import Tokenizer, default_tokenize
from docgraph_mt.translator import (
    ContextPackage,
    ContextRecord,
    TranslatedChunk,
    TranslatedDocument,
    in_neighbors,
    join_segments,
    request_translation,
)

DEFAULT_FIXED_CHUNKS = 10
DEFAULT_SEQ_RANGE = 5
ADJACENT_MARKER = "adjacent_context"


class StrategyId(str, Enum):
    SENT_MT = "sent_mt"
    ONE_PASS = "one_pass"
    TRANSGRAPH = "transgraph"
    FIXED_CHUNKING = "fixed_chunking"
    NO_REL = "no_rel"
    SEQ_CONTEXT = "seq_context"

    def __str__(self) -> str:
        return self.value


def plain_translation_prompt(text: str, src_lang: str, tgt_lang: str, unit: str) -> str:
    return prompts.render(
        prompts.PLAIN_TRANSLATION_TEMPLATE,
        unit=unit,
        src_lang=prompts.language_name(src_lang),
        tgt_lang=prompts.language_name(tgt_lang),
        text=text,
    )


def translate_sentence_level(
    document: str,
    src_lang: str,
    tgt_lang: str,
    gateway: Gateway,
    *,
    sentences: Optional[Sequence[Sentence]] = None,
    max_retries: int = 2,
) -> TranslatedDocument:
    if sentences is None:
        sentences = segment_sentences(document, src_lang, gateway.tokenizer)
    segments = []
    for s in sentences:
        prompt = plain_translation_prompt(s.text, src_lang, tgt_lang, "sentence")
        try:
            text = request_translation(gateway, prompt, max_retries, f"sentence {s.index}")
        except LLMError as exc:
            raise TranslationError(f"sentence {s.index} could not be translated: {exc}", s.index) from exc
        segments.append(TranslatedChunk(s.index + 1, s.text, text))
    # each sentence owns the document slice up to the next sentence
    starts = [0] + [s.char_span[0] for s in sentences[1:]]
    ends = starts[1:] + [len(document)]
    sources = [document[a:b] for a, b in zip(starts, ends)]
    return TranslatedDocument(join_segments(sources, [t.target_text for t in segments], tgt_lang), segments, StrategyId.SENT_MT.value)


def translate_single_pass(document: str, src_lang: str, tgt_lang: str, gateway: Gateway) -> TranslatedDocument:
    """Exactly one translate call carrying the whole document."""
    prompt = plain_translation_prompt(document.strip(), src_lang, tgt_lang, "document")
    text = gateway.complete(ChatRequest(prompt, tag="translate")).text.strip()
    return TranslatedDocument(text, [TranslatedChunk(1, document.strip(), text)], StrategyId.ONE_PASS.value)


def fixed_size_chunks(
    document: str,
    k: int = DEFAULT_FIXED_CHUNKS,
    *,
    language: str = "en",
    tokenizer: Tokenizer = default_tokenize,
    sentences: Optional[Sequence[Sentence]] = None,
) -> list[Chunk]:
    """Greedy packing of whole sentences into ``min(k, S)`` token-balanced chunks.

    Chunk ``m`` closes at the sentence boundary whose cumulative token count
    lies closest to ``m * total / k``, while leaving at least one sentence for
    every chunk still to be filled.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if sentences is None:
        sentences = segment_sentences(document, language, tokenizer)
    S = len(sentences)
    n_chunks = min(k, S)
    total = sum(s.token_count for s in sentences)
    groups = []
    pos = 0
    cumulative = 0
    for m in range(1, n_chunks):
        target = m * total / n_chunks
        start = pos
        cumulative += sentences[pos].token_count
        pos += 1
        latest = S - (n_chunks - m)  # exclusive bound keeping one sentence per remaining chunk
        while pos < latest:
            nxt = cumulative + sentences[pos].token_count
            if abs(nxt - target) < abs(cumulative - target):
                cumulative = nxt
                pos += 1
            else:
                break
        groups.append(range(start, pos))
    groups.append(range(pos, S))
    return build_chunks(document, sentences, groups)


def sequential_context(
    j: int,
    k: int,
    chunks: Sequence[Chunk],
    *,
    graph: Optional[DiscourseGraph] = None,
    attach_labels: bool = True,
) -> ContextPackage:
    """Records for chunks ``j-1 .. j-k`` in ascending order.

    Without a graph (or with ``attach_labels=False``) records carry no label, as
    the no-relation ablation wants. With a graph, a record takes the label of its
    in-neighbour edge when one exists and a neutral marker otherwise.
    """
    if k < 1:
        raise ValueError("k must be positive")
    labelled = {}
    if graph is not None and attach_labels:
        labelled = {r.neighbor_id: r for r in in_neighbors(graph, j)}
    records = []
    for i in range(max(1, j - k), j):
        text = chunks[i - 1].content
        if graph is None or not attach_labels:
            records.append(ContextRecord(i, text))
        elif i in labelled:
            records.append(ContextRecord(i, text, labelled[i].label, labelled[i].reason))
        else:
            records.append(ContextRecord(i, text, ADJACENT_MARKER, ""))
    return ContextPackage(j, tuple(records))
