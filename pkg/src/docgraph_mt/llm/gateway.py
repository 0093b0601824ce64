"""Provider-agnostic chat-completion client with retries and cost accounting."""

from __future__ import annotations

import logging
import random
import threading
import time
from collections import Counter
from typing import Any, Callable, Optional, Protocol

from docgraph_mt.errors import BackendRefusal, StructureError, TransportError
from docgraph_mt.llm.ledger import CostLedger
from docgraph_mt.llm.structured import StructuredShape, parse_object, repair_instruction
from docgraph_mt.llm.types import BackendReply, CallInfo, ChatRequest, ChatResponse
from docgraph_mt.tokenize import Tokenizer, default_tokenize

logger = logging.getLogger(__name__)


class Backend(Protocol):
    backend_id: str

    def respond(self, request: ChatRequest, call: CallInfo) -> BackendReply: ...


class Gateway:
    """Sends requests to a backend and records every completed call in a ledger.

    One gateway is meant to serve one document run: scripted backends key their
    responses on the per-gateway ordinals, and the ledger becomes that run's
    cost record. The backend itself may be shared between gateways.
    """

    def __init__(
        self,
        backend: Backend,
        *,
        ledger: Optional[CostLedger] = None,
        tokenizer: Tokenizer = default_tokenize,
        transport_retries: int = 3,
        repair_retries: int = 2,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        self.backend = backend
        self.ledger = ledger if ledger is not None else CostLedger()
        self.tokenizer = tokenizer
        self.transport_retries = transport_retries
        self.repair_retries = repair_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._lock = threading.Lock()
        self._tag_counts: Counter[str] = Counter()
        self._prompt_counts: Counter[str] = Counter()

    def estimate_tokens(self, text: str) -> int:
        return len(self.tokenizer(text))

    def _next_call(self, request: ChatRequest) -> CallInfo:
        with self._lock:
            info = CallInfo(self._tag_counts[request.tag], self._prompt_counts[request.user_text])
            self._tag_counts[request.tag] += 1
            self._prompt_counts[request.user_text] += 1
        return info

    def _backoff(self, attempt: int) -> float:
        base = self.backoff_base * (2**attempt)
        return base + self._rng.uniform(0, self.backoff_base)

    def complete(self, request: ChatRequest) -> ChatResponse:
        info = self._next_call(request)
        attempt = 0
        while True:
            try:
                reply = self.backend.respond(request, info)
                break
            except TransportError as exc:
                if not exc.retriable or attempt >= self.transport_retries:
                    raise
                delay = self._backoff(attempt)
                logger.warning("transport error (%s); retrying in %.2fs", exc, delay)
                self._sleep(delay)
                attempt += 1

        input_tokens = reply.input_tokens
        if input_tokens is None:
            input_tokens = self.estimate_tokens(request.system_text) + self.estimate_tokens(request.prompt)
        output_tokens = reply.output_tokens
        if output_tokens is None:
            output_tokens = self.estimate_tokens(reply.text)
        self.ledger.record(request.tag, input_tokens, output_tokens)

        if not reply.text.strip():
            raise BackendRefusal(f"empty response from {self.backend.backend_id} ({request.tag})")
        return ChatResponse(reply.text, input_tokens, output_tokens, self.backend.backend_id)

    def complete_structured(
        self,
        request: ChatRequest,
        shape: StructuredShape,
        max_retries: Optional[int] = None,
    ) -> Any:
        """Return the first response that parses and validates against ``shape``.

        Each failed attempt re-issues the request with a corrective note. After
        the budget is spent the last validation error is re-raised, keeping its
        class (so e.g. a coverage failure stays distinguishable) and the raw text.
        """
        retries = self.repair_retries if max_retries is None else max_retries
        current = request
        last_error: Optional[StructureError] = None
        for attempt in range(retries + 1):
            response = self.complete(current)
            try:
                return shape.check(parse_object(response.text))
            except StructureError as exc:
                exc.raw_text = response.text
                last_error = exc
                logger.info("structured attempt %d/%d failed: %s", attempt + 1, retries + 1, exc)
                current = request.with_repair(repair_instruction(shape, str(exc)))
        assert last_error is not None
        raise last_error
