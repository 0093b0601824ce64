import json

import httpx
import pytest

from docgraph_mt.errors import BackendRefusal, CoverageError, FixtureError, StructureError, TransportError
from docgraph_mt.llm import (
    BackendReply,
    ChatRequest,
    CostLedger,
    Gateway,
    HTTPBackend,
    ScriptedBackend,
    StructuredShape,
    extract_braced_block,
    parse_object,
)
from docgraph_mt.tokenize import estimate_tokens

RELATION_JSON = '{"reason":"same entity","relation":"entity_coreference","direction":"forward"}'


def no_sleep(_):
    pass


class FlakyBackend:
    backend_id = "test:flaky"

    def __init__(self, failures, retriable=True):
        self.failures = failures
        self.retriable = retriable
        self.calls = 0

    def respond(self, request, call):
        self.calls += 1
        if self.calls <= self.failures:
            raise TransportError("boom", retriable=self.retriable)
        return BackendReply("ok", 1, 1)


def test_scripted_echo_and_call_count():
    gw = Gateway(ScriptedBackend([{"prompt": "hi", "response": "ok"}]))
    resp = gw.complete(ChatRequest("hi", tag="translate"))
    assert resp.text == "ok"
    assert gw.ledger.calls == 1
    assert resp.backend_id == "mock:scripted"


def test_ledger_is_additive():
    backend = ScriptedBackend([
        {"tag": "translate", "ordinal": 0, "response": "a", "input_tokens": 3, "output_tokens": 2},
        {"tag": "translate", "ordinal": 1, "response": "b", "input_tokens": 5, "output_tokens": 4},
    ])
    gw = Gateway(backend)
    gw.complete(ChatRequest("x", tag="translate"))
    gw.complete(ChatRequest("y", tag="translate"))
    assert (gw.ledger.input_tokens, gw.ledger.output_tokens, gw.ledger.calls) == (8, 6, 2)
    assert gw.ledger.stage("translate").total_tokens == 14


def test_unmatched_prompt_is_refused_but_recorded():
    gw = Gateway(ScriptedBackend([{"prompt": "hi", "response": "ok"}]))
    with pytest.raises(BackendRefusal):
        gw.complete(ChatRequest("something else", tag="chunk"))
    assert gw.ledger.calls == 1


def test_matcher_priority_and_sequences():
    backend = ScriptedBackend([
        {"tag": "relation", "response": "tag-default"},
        {"contains": "needle", "response": "contains-1"},
        {"contains": "needle", "response": "contains-2"},
        {"prompt": "exact needle", "response": "exact"},
        {"tag": "relation", "ordinal": 1, "response": "second-relation"},
    ])
    gw = Gateway(backend)
    assert gw.complete(ChatRequest("exact needle", tag="relation")).text == "exact"
    assert gw.complete(ChatRequest("a needle here", tag="relation")).text == "contains-1"
    assert gw.complete(ChatRequest("a needle here", tag="relation")).text == "contains-2"
    assert gw.complete(ChatRequest("a needle here", tag="relation")).text == "contains-2"
    # relation ordinals so far: 0..3, so the next is 4 and falls back to the tag default
    assert gw.complete(ChatRequest("plain", tag="relation")).text == "tag-default"


def test_tag_ordinal_record():
    backend = ScriptedBackend([{"tag": "judge", "ordinal": 1, "response": "second"}, {"tag": "judge", "response": "d"}])
    gw = Gateway(backend)
    assert gw.complete(ChatRequest("a", tag="judge")).text == "d"
    assert gw.complete(ChatRequest("b", tag="judge")).text == "second"


def test_fixture_file_with_comments(tmp_path):
    path = tmp_path / "f.jsonl"
    path.write_text('# comment\n\n{"prompt": "p", "response": "r"}\n', encoding="utf-8")
    assert Gateway(ScriptedBackend.from_file(path)).complete(ChatRequest("p", tag="chunk")).text == "r"
    path.write_text("{not json}\n", encoding="utf-8")
    with pytest.raises(FixtureError):
        ScriptedBackend.from_file(path)
    with pytest.raises(FixtureError):
        ScriptedBackend([{"response": "r"}])
    with pytest.raises(FixtureError):
        ScriptedBackend([{"tag": "nope", "response": "r"}])


def test_structured_valid_first_attempt():
    gw = Gateway(ScriptedBackend([{"tag": "relation", "response": RELATION_JSON}]))
    shape = StructuredShape(required={"reason": str, "relation": str, "direction": str})
    value = gw.complete_structured(ChatRequest("pair", tag="relation"), shape, max_retries=2)
    assert value == json.loads(RELATION_JSON)
    assert gw.ledger.calls == 1


def test_structured_retry_then_fenced_payload():
    backend = ScriptedBackend([
        {"prompt": "pair", "response": "I think they are related."},
        {"prompt": "pair", "response": "Sure:\n```json\n" + RELATION_JSON + "\n```"},
    ])
    gw = Gateway(backend)
    shape = StructuredShape(required={"relation": str})
    value = gw.complete_structured(ChatRequest("pair", tag="relation"), shape, max_retries=2)
    assert value["relation"] == "entity_coreference"
    assert gw.ledger.calls == 2


def test_structured_exhaustion_keeps_error_class():
    gw = Gateway(ScriptedBackend([{"tag": "chunk", "response": "not json at all"}]))
    with pytest.raises(StructureError) as info:
        gw.complete_structured(ChatRequest("c", tag="chunk"), StructuredShape(), max_retries=2)
    assert info.value.raw_text == "not json at all"
    assert gw.ledger.calls == 3

    def reject(_):
        raise CoverageError("missing sentence")

    gw = Gateway(ScriptedBackend([{"tag": "chunk", "response": "{}"}]))
    with pytest.raises(CoverageError):
        gw.complete_structured(ChatRequest("c", tag="chunk"), StructuredShape(validate=reject), max_retries=1)


def test_transport_retries_with_backoff():
    delays = []
    backend = FlakyBackend(failures=2)
    gw = Gateway(backend, transport_retries=3, sleep=delays.append)
    assert gw.complete(ChatRequest("x", tag="translate")).text == "ok"
    assert backend.calls == 3
    assert len(delays) == 2 and delays[1] > delays[0] * 1.0 - 0.5
    assert gw.ledger.calls == 1


def test_transport_gives_up():
    gw = Gateway(FlakyBackend(failures=10), transport_retries=2, sleep=no_sleep)
    with pytest.raises(TransportError):
        gw.complete(ChatRequest("x", tag="translate"))
    assert gw.ledger.calls == 0
    backend = FlakyBackend(failures=1, retriable=False)
    with pytest.raises(TransportError):
        Gateway(backend, sleep=no_sleep).complete(ChatRequest("x", tag="translate"))
    assert backend.calls == 1


def test_estimated_tokens_when_backend_gives_none():
    gw = Gateway(ScriptedBackend([{"prompt": "Hello world.", "response": "Hallo Welt."}]))
    resp = gw.complete(ChatRequest("Hello world.", tag="translate"))
    assert (resp.input_tokens, resp.output_tokens) == (3, 3)


def test_estimate_tokens_examples():
    assert estimate_tokens("") == 0
    assert estimate_tokens("Hello world.") == 3


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest("x", tag="other")
    req = ChatRequest("x", tag="chunk").with_repair("fix it")
    assert req.prompt.endswith("fix it") and req.user_text == "x"


def test_braced_block_extraction():
    assert extract_braced_block('say {"a": "}"} and {"b": 1}') == '{"a": "}"}'
    assert extract_braced_block("none") is None
    assert parse_object("{'a': True}") == {"a": True}
    with pytest.raises(StructureError):
        parse_object("[1, 2]")


def test_ledger_round_trip_and_merge():
    a = CostLedger()
    a.record("chunk", 10, 2)
    b = CostLedger()
    b.record("relation", 5, 1)
    b.record("chunk", 1, 1)
    a.merge(b)
    assert a.to_dict()["per_tag"]["chunk"] == {"calls": 2, "input_tokens": 11, "output_tokens": 3}
    assert CostLedger.from_dict(a.to_dict()).to_dict() == a.to_dict()
    with pytest.raises(ValueError):
        a.record("chunk", -1, 0)


def _http(handler, **kw):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HTTPBackend("http://llm.test/v1/chat/completions", "m", api_key="k", client=client, **kw)


def test_http_backend_parses_usage():
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={
            "choices": [{"message": {"content": "Hallo"}}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 2},
        })

    gw = Gateway(_http(handler))
    resp = gw.complete(ChatRequest("Hello", tag="translate", system_text="sys"))
    assert (resp.text, resp.input_tokens, resp.output_tokens) == ("Hallo", 7, 2)
    assert seen["auth"] == "Bearer k"
    assert seen["body"]["messages"][0] == {"role": "system", "content": "sys"}
    assert seen["body"]["temperature"] == 0.7 and seen["body"]["top_p"] == 0.8


def test_http_backend_error_classes():
    codes = iter([503, 200])

    def handler(request):
        code = next(codes)
        if code != 200:
            return httpx.Response(code)
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    assert Gateway(_http(handler), sleep=no_sleep).complete(ChatRequest("x", tag="chunk")).text == "ok"

    bad = _http(lambda r: httpx.Response(401, text="nope"))
    with pytest.raises(TransportError) as info:
        Gateway(bad, sleep=no_sleep).complete(ChatRequest("x", tag="chunk"))
    assert not info.value.retriable

    garbled = _http(lambda r: httpx.Response(200, json={"unexpected": 1}))
    with pytest.raises(TransportError):
        Gateway(garbled, sleep=no_sleep).complete(ChatRequest("x", tag="chunk"))


def test_http_backend_reads_key_from_environment(monkeypatch):
    monkeypatch.setenv("DOCGRAPH_API_KEY", "from-env")
    backend = HTTPBackend("http://x", "m", client=httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500))))
    assert backend.api_key == "from-env"
