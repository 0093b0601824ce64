"""Extraction and validation of JSON-like payloads from free-form LLM text."""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

from docgraph_mt.errors import StructureError


def extract_braced_block(text: str) -> Optional[str]:
    """Return the first balanced ``{...}`` block in ``text``, honouring quoted strings."""
    start = text.find("{")
    while start != -1:
        depth = 0
        quote = None
        escaped = False
        for pos in range(start, len(text)):
            ch = text[pos]
            if quote:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == quote:
                    quote = None
                continue
            if ch in "\"'":
                quote = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : pos + 1]
        # unbalanced from this opening brace; try the next one
        start = text.find("{", start + 1)
    return None


def parse_object(text: str) -> dict:
    block = extract_braced_block(text)
    if block is None:
        raise StructureError("no brace-delimited object found in response", raw_text=text)
    try:
        value = json.loads(block)
    except json.JSONDecodeError:
        # models sometimes emit a Python dict literal ('single quotes', True/False)
        try:
            value = ast.literal_eval(block)
        except (ValueError, SyntaxError) as exc:
            raise StructureError(f"response object is not valid JSON: {exc}", raw_text=text) from None
    if not isinstance(value, dict):
        raise StructureError("response payload is not an object", raw_text=text)
    return value


@dataclass(frozen=True)
class StructuredShape:
    """Required keys with their accepted Python types plus an optional validator.

    ``validate`` receives the parsed dict and returns the final value; it signals
    rejection by raising :class:`StructureError` (or a subclass).
    """

    required: Mapping[str, Any] = field(default_factory=dict)
    validate: Optional[Callable[[dict], Any]] = None
    description: str = "a JSON object"

    def check(self, value: dict) -> Any:
        for key, kind in self.required.items():
            if key not in value:
                raise StructureError(f"missing required key {key!r}")
            if kind is not None and not isinstance(value[key], kind):
                raise StructureError(f"key {key!r} has the wrong type ({type(value[key]).__name__})")
        if self.validate is not None:
            return self.validate(value)
        return value


def repair_instruction(shape: StructuredShape, problem: str) -> str:
    return (
        f"Your previous answer could not be used: {problem}. "
        f"Reply again with ONLY {shape.description}, and nothing else."
    )
