"""Backends: a scripted fixture mock, a rule-based synthetic mock, and a live HTTP client."""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from docgraph_mt.errors import FixtureError, TransportError
from docgraph_mt.llm.types import STAGE_TAGS, BackendReply, CallInfo, ChatRequest

API_KEY_ENV = "DOCGRAPH_API_KEY"


@dataclass(frozen=True)
class _Scripted:
    text: str
    input_tokens: Optional[int]
    output_tokens: Optional[int]

    def reply(self) -> BackendReply:
        return BackendReply(self.text, self.input_tokens, self.output_tokens)


def _pick(seq: tuple[_Scripted, ...], ordinal: int) -> _Scripted:
    return seq[min(ordinal, len(seq) - 1)]


class ScriptedBackend:
    """Deterministic mock answering from a JSONL fixture.

    Each record carries ``response`` (plus optional ``input_tokens`` /
    ``output_tokens``) and one matcher, tried in this order:

    * ``prompt``: exact ``user_text``;
    * ``contains``: substring of ``user_text`` (first record in file order wins);
    * ``tag`` + ``ordinal``: the n-th call (0-based) with that stage tag;
    * ``tag`` alone: any call with that stage tag.

    Repeated records for the same ``prompt``/``contains``/``tag`` key are served
    in sequence on repeated calls, the last one repeating. Unmatched requests get
    an empty reply, which the gateway turns into ``BackendRefusal``.
    """

    backend_id = "mock:scripted"

    def __init__(self, records: list[dict]):
        exact: dict[str, list[_Scripted]] = {}
        contains: dict[str, list[_Scripted]] = {}
        by_ordinal: dict[tuple[str, int], _Scripted] = {}
        by_tag: dict[str, list[_Scripted]] = {}
        for n, rec in enumerate(records):
            if not isinstance(rec, dict) or "response" not in rec:
                raise FixtureError(f"record {n}: expected an object with a 'response' field")
            if not isinstance(rec["response"], str):
                raise FixtureError(f"record {n}: 'response' must be a string")
            item = _Scripted(rec["response"], _opt_int(rec, "input_tokens", n), _opt_int(rec, "output_tokens", n))
            if "prompt" in rec:
                exact.setdefault(str(rec["prompt"]), []).append(item)
            elif "contains" in rec:
                contains.setdefault(str(rec["contains"]), []).append(item)
            elif "tag" in rec:
                tag = rec["tag"]
                if tag not in STAGE_TAGS:
                    raise FixtureError(f"record {n}: unknown tag {tag!r}")
                if "ordinal" in rec:
                    by_ordinal[(tag, int(rec["ordinal"]))] = item
                else:
                    by_tag.setdefault(tag, []).append(item)
            else:
                raise FixtureError(f"record {n}: needs one of 'prompt', 'contains' or 'tag'")
        self._exact = {k: tuple(v) for k, v in exact.items()}
        self._contains = tuple((k, tuple(v)) for k, v in contains.items())
        self._by_ordinal = dict(by_ordinal)
        self._by_tag = {k: tuple(v) for k, v in by_tag.items()}

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ScriptedBackend":
        records = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FixtureError(f"{path}:{lineno}: {exc}") from None
        return cls(records)

    def respond(self, request: ChatRequest, call: CallInfo) -> BackendReply:
        text = request.user_text
        if text in self._exact:
            return _pick(self._exact[text], call.prompt_ordinal).reply()
        for needle, seq in self._contains:
            if needle in text:
                return _pick(seq, call.prompt_ordinal).reply()
        key = (request.tag, call.tag_ordinal)
        if key in self._by_ordinal:
            return self._by_ordinal[key].reply()
        if request.tag in self._by_tag:
            return _pick(self._by_tag[request.tag], call.tag_ordinal).reply()
        return BackendReply("", 0, 0)


def _opt_int(rec: dict, key: str, n: int) -> Optional[int]:
    if key not in rec or rec[key] is None:
        return None
    value = rec[key]
    if not isinstance(value, int) or value < 0:
        raise FixtureError(f"record {n}: {key} must be a non-negative integer")
    return value


def _digest(*parts: str) -> int:
    h = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


class SyntheticBackend:
    """Never-failing rule-based mock that understands this package's prompts.

    Chunking prompts get contiguous groups of one to three sentences, relation
    prompts get a label chosen by hashing the prompt, translation prompts echo
    the source text, and judge prompts get a heuristic annotation. All choices
    are pure functions of the prompt and ``seed``.
    """

    backend_id = "mock:synthetic"

    def __init__(self, seed: int = 0, *, carry_over: bool = True, no_relation_rate: float = 0.4):
        self.seed = seed
        self.carry_over = carry_over
        self.no_relation_rate = no_relation_rate

    def respond(self, request: ChatRequest, call: CallInfo) -> BackendReply:
        # imported lazily: prompts depends on the graph module, which depends on llm
        from docgraph_mt import prompts

        text = request.user_text
        if request.tag == "chunk":
            return BackendReply(self._chunk(text))
        if request.tag == "relation":
            return BackendReply(self._relation(text))
        if request.tag == "translate":
            return BackendReply(prompts.extract_source_text(text))
        return BackendReply(self._judge(text))

    def _chunk(self, prompt: str) -> str:
        indices = [int(m) for m in re.findall(r"^\[(\d+)\] ", prompt, flags=re.MULTILINE)]
        state = _digest(str(self.seed), prompt)
        groups = []
        pos = 0
        while pos < len(indices):
            size = 1 + state % 3
            state //= 3
            groups.append(indices[pos : pos + size])
            pos += size
        carry = self.carry_over and len(groups) > 1 and state % 4 == 0
        chunks = [
            {
                "chunk_id": n + 1,
                "rationale": "Adjacent sentences grouped by the synthetic backend.",
                "sentence_indices": g,
                "carry_over": carry and n == len(groups) - 1,
            }
            for n, g in enumerate(groups)
        ]
        return json.dumps({"chunks": chunks})

    def _relation(self, prompt: str) -> str:
        from docgraph_mt.graph import RelationLabel

        labels = list(RelationLabel)
        state = _digest(str(self.seed), prompt)
        if (state % 1000) / 1000 < self.no_relation_rate:
            return json.dumps({"reason": "no relation found", "relation": "none", "direction": "forward"})
        state //= 1000
        label = labels[state % len(labels)]
        direction = "backward" if (state // len(labels)) % 5 == 0 else "forward"
        return json.dumps({"reason": f"synthetic {label.value} link", "relation": label.value, "direction": direction})

    def _judge(self, prompt: str) -> str:
        from docgraph_mt import cohesion

        return cohesion.synthetic_judgement(prompt)


class HTTPBackend:
    """Chat-completions style HTTP endpoint (OpenAI-compatible wire format)."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
        client=None,
    ):
        import httpx

        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.backend_id = f"http:{model}"
        self._client = client or httpx.Client(timeout=timeout)

    def payload(self, request: ChatRequest) -> dict:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.prompt})
        return {
            "model": self.model,
            "messages": messages,
            "temperature": request.decoding.temperature,
            "top_p": request.decoding.top_p,
            "max_tokens": request.decoding.max_output_tokens,
        }

    def respond(self, request: ChatRequest, call: CallInfo) -> BackendReply:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._client.post(self.endpoint, json=self.payload(request), headers=headers)
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}", retriable=False)
        try:
            body = resp.json()
            text = body["choices"][0]["message"].get("content") or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response body: {exc}", retriable=False) from exc
        usage = body.get("usage") or {}
        return BackendReply(text, usage.get("prompt_tokens"), usage.get("completion_tokens"))
