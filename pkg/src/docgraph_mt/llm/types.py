from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

STAGE_TAGS = ("chunk", "relation", "translate", "judge")


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.7
    top_p: float = 0.8
    max_output_tokens: int = 4096

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call.

    ``repair_note`` holds a corrective instruction appended on structured-output
    retries; scripted backends match on ``user_text`` alone so a fixture entry
    keeps matching across repair attempts.
    """

    user_text: str
    tag: str
    system_text: str = ""
    decoding: DecodingParams = field(default_factory=DecodingParams)
    repair_note: str = ""

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if self.tag not in STAGE_TAGS:
            raise ValueError(f"tag must be one of {STAGE_TAGS}, got {self.tag!r}")

    @property
    def prompt(self) -> str:
        if self.repair_note:
            return f"{self.user_text}\n\n{self.repair_note}"
        return self.user_text

    def with_repair(self, note: str) -> "ChatRequest":
        return replace(self, repair_note=note)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    input_tokens: int
    output_tokens: int
    backend_id: str


@dataclass(frozen=True)
class BackendReply:
    """Raw backend output; token counts are None when the provider reports none."""

    text: str
    input_tokens: Optional[int] = None
    output_tokens: Optional[int] = None


@dataclass(frozen=True)
class CallInfo:
    """Per-gateway ordinals handed to the backend (0-based)."""

    tag_ordinal: int
    prompt_ordinal: int
