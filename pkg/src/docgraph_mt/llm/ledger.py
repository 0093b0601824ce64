from __future__ import annotations

import threading
from dataclasses import dataclass, field


@dataclass
class LedgerEntry:
    calls: int = 0
    input_tokens: int = 0
    output_tokens: int = 0

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    def to_dict(self) -> dict:
        return {
            "calls": self.calls,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }


@dataclass
class CostLedger:
    """Thread-safe accounting of LLM calls and tokens, broken down per stage tag."""

    calls: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    per_tag: dict[str, LedgerEntry] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, tag: str, input_tokens: int, output_tokens: int) -> None:
        if input_tokens < 0 or output_tokens < 0:
            raise ValueError("token counts must be non-negative")
        with self._lock:
            entry = self.per_tag.setdefault(tag, LedgerEntry())
            entry.calls += 1
            entry.input_tokens += input_tokens
            entry.output_tokens += output_tokens
            self.calls += 1
            self.input_tokens += input_tokens
            self.output_tokens += output_tokens

    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    def merge(self, other: "CostLedger") -> None:
        snapshot = other.to_dict()
        with self._lock:
            for tag, counts in snapshot["per_tag"].items():
                entry = self.per_tag.setdefault(tag, LedgerEntry())
                entry.calls += counts["calls"]
                entry.input_tokens += counts["input_tokens"]
                entry.output_tokens += counts["output_tokens"]
            self.calls += snapshot["calls"]
            self.input_tokens += snapshot["input_tokens"]
            self.output_tokens += snapshot["output_tokens"]

    def stage(self, tag: str) -> LedgerEntry:
        with self._lock:
            entry = self.per_tag.get(tag, LedgerEntry())
            return LedgerEntry(entry.calls, entry.input_tokens, entry.output_tokens)

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "calls": self.calls,
                "input_tokens": self.input_tokens,
                "output_tokens": self.output_tokens,
                "total_tokens": self.input_tokens + self.output_tokens,
                "per_tag": {tag: self.per_tag[tag].to_dict() for tag in sorted(self.per_tag)},
            }

    @classmethod
    def from_dict(cls, data: dict) -> "CostLedger":
        ledger = cls(
            calls=int(data["calls"]),
            input_tokens=int(data["input_tokens"]),
            output_tokens=int(data["output_tokens"]),
        )
        for tag, counts in data.get("per_tag", {}).items():
            ledger.per_tag[tag] = LedgerEntry(
                int(counts["calls"]), int(counts["input_tokens"]), int(counts["output_tokens"])
            )
        return ledger
