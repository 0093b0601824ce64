"""Discourse-graph-guided document-level machine translation with LLMs."""

from docgraph_mt.chunker import Chunk, Sentence, chunk_document, segment_sentences
from docgraph_mt.graph import DiscourseGraph, Edge, RelationLabel, build_graph, enumerate_pairs
from docgraph_mt.llm import ChatRequest, CostLedger, Gateway, ScriptedBackend, SyntheticBackend
from docgraph_mt.translator import select_context, translate_document

__version__ = "0.1.0"

__all__ = [
    "ChatRequest",
    "Chunk",
    "CostLedger",
    "DiscourseGraph",
    "Edge",
    "Gateway",
    "RelationLabel",
    "ScriptedBackend",
    "Sentence",
    "SyntheticBackend",
    "build_graph",
    "chunk_document",
    "enumerate_pairs",
    "segment_sentences",
    "select_context",
    "translate_document",
]
