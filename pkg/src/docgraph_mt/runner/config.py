"""Run configuration, loadable from JSON or YAML and overridable from the CLI."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from docgraph_mt.baselines import DEFAULT_FIXED_CHUNKS, DEFAULT_SEQ_RANGE, StrategyId
from docgraph_mt.chunker import DEFAULT_WINDOW_TOKENS
from docgraph_mt.errors import ManifestError
from docgraph_mt.graph import DEFAULT_PAIR_WINDOW
from docgraph_mt.llm import Backend, HTTPBackend, ScriptedBackend, SyntheticBackend
from docgraph_mt.tokenize import TOKENIZERS
from docgraph_mt.translator import DEFAULT_CONTEXT_CAP, TranslationConfig

# fields that only affect where or how fast things run, not what is produced
_NON_SEMANTIC = {"output_dir", "max_workers", "doc_workers"}


@dataclass(frozen=True)
class RunConfig:
    strategy: str = StrategyId.TRANSGRAPH.value
    src_lang: str = "en"
    tgt_lang: str = "zh"
    T: int = DEFAULT_WINDOW_TOKENS
    w: int = DEFAULT_PAIR_WINDOW
    cap: int = DEFAULT_CONTEXT_CAP
    backend: str = "synthetic"  # "synthetic" | "mock:<fixture.jsonl>" | "http"
    endpoint: Optional[str] = None
    model: Optional[str] = None
    tokenizer: str = "default"
    output_dir: str = "out"
    on_error: str = "halt"
    prefer: str = "nearest"
    fixed_chunks: int = DEFAULT_FIXED_CHUNKS
    seq_range: int = DEFAULT_SEQ_RANGE
    seq_attach_labels: bool = True
    retries: int = 2
    max_workers: int = 1
    doc_workers: int = 1
    seed: int = 0

    def __post_init__(self):
        StrategyId(self.strategy)
        for name in ("T", "w", "cap", "fixed_chunks", "seq_range", "max_workers", "doc_workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.tokenizer not in TOKENIZERS:
            raise ValueError(f"unknown tokenizer {self.tokenizer!r}")
        if not (self.backend in ("synthetic", "http") or self.backend.startswith("mock:")):
            raise ValueError(f"backend must be 'synthetic', 'http' or 'mock:<path>', got {self.backend!r}")
        if self.backend == "http" and not (self.endpoint and self.model):
            raise ValueError("the http backend needs endpoint and model")
        # validates on_error and prefer
        self.translation_config()

    @property
    def strategy_id(self) -> StrategyId:
        return StrategyId(self.strategy)

    def translation_config(self) -> TranslationConfig:
        return TranslationConfig(
            src_lang=self.src_lang,
            tgt_lang=self.tgt_lang,
            cap=self.cap,
            prefer=self.prefer,
            on_error=self.on_error,
            max_workers=self.max_workers,
            max_retries=self.retries,
        )

    def make_backend(self) -> Backend:
        if self.backend == "synthetic":
            return SyntheticBackend(seed=self.seed)
        if self.backend == "http":
            return HTTPBackend(self.endpoint, self.model)
        return ScriptedBackend.from_file(self.backend[len("mock:") :])

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def semantic_dict(self) -> dict:
        """Fields that can change the artifacts, with mock fixtures replaced by their content hash."""
        data = {k: v for k, v in self.to_dict().items() if k not in _NON_SEMANTIC}
        if self.backend.startswith("mock:"):
            digest = hashlib.sha256(Path(self.backend[5:]).read_bytes()).hexdigest()
            data["backend"] = f"mock:sha256:{digest}"
        return data

    def digest(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ManifestError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8")
        if str(path).endswith((".yaml", ".yml")):
            import yaml

            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
        if not isinstance(data, dict):
            raise ManifestError(f"{path}: configuration must be a mapping")
        return cls.from_dict(data)
