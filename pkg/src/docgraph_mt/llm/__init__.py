from docgraph_mt.llm.backends import API_KEY_ENV, HTTPBackend, ScriptedBackend, SyntheticBackend
from docgraph_mt.llm.gateway import Backend, Gateway
from docgraph_mt.llm.ledger import CostLedger, LedgerEntry
from docgraph_mt.llm.structured import StructuredShape, extract_braced_block, parse_object
from docgraph_mt.llm.types import (
    STAGE_TAGS,
    BackendReply,
    CallInfo,
    ChatRequest,
    ChatResponse,
    DecodingParams,
)

__all__ = [
    "API_KEY_ENV",
    "STAGE_TAGS",
    "Backend",
    "BackendReply",
    "CallInfo",
    "ChatRequest",
    "ChatResponse",
    "CostLedger",
    "DecodingParams",
    "Gateway",
    "HTTPBackend",
    "LedgerEntry",
    "ScriptedBackend",
    "StructuredShape",
    "SyntheticBackend",
    "extract_braced_block",
    "parse_object",
]
