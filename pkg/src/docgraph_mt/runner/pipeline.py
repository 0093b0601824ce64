"""Strategy runs over a document collection, with per-document artifacts and a run manifest."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from docgraph_mt.baselines import (
    StrategyId,
    fixed_size_chunks,
    sequential_context,
    translate_sentence_level,
    translate_single_pass,
)
from docgraph_mt.chunker import Chunk, ChunkingTrace, chunk_document, write_chunks_jsonl
from docgraph_mt.errors import DocGraphError, MetricError
from docgraph_mt.graph import DiscourseGraph, build_graph, export_graph_dot
from docgraph_mt.llm import Backend, CostLedger, Gateway
from docgraph_mt.metrics import MetricsReport, d_bleu, terminology_accuracy
from docgraph_mt.runner.collection import DocumentRecord, collection_digest
from docgraph_mt.runner.config import RunConfig
from docgraph_mt.segment import segment_sentences
from docgraph_mt.tokenize import get_tokenizer
from docgraph_mt.translator import TranslatedDocument, translate_document

logger = logging.getLogger(__name__)

RUN_MANIFEST = "run.json"
_GRAPH_STRATEGIES = {StrategyId.TRANSGRAPH, StrategyId.FIXED_CHUNKING, StrategyId.SEQ_CONTEXT}


@dataclass
class DocumentResult:
    doc_id: str
    status: str  # "ok" | "failed"
    artifacts: dict[str, str] = field(default_factory=dict)
    ledger: CostLedger = field(default_factory=CostLedger)
    metrics: dict = field(default_factory=dict)
    error: Optional[str] = None
    chunks: list[Chunk] = field(default_factory=list)
    graph: Optional[DiscourseGraph] = None
    translation: Optional[TranslatedDocument] = None
    windows: int = 0


@dataclass
class RunArtifacts:
    run_id: str
    run_dir: Path
    config: RunConfig
    documents: list[DocumentResult]

    @property
    def failed(self) -> list[str]:
        return [d.doc_id for d in self.documents if d.status != "ok"]

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / RUN_MANIFEST


def make_run_id(config: RunConfig, docs: list[DocumentRecord]) -> str:
    """``<strategy>-<12 hex>`` derived from the config and collection contents."""
    import hashlib

    digest = hashlib.sha256(f"{config.digest()}:{collection_digest(docs)}".encode("ascii")).hexdigest()
    return f"{config.strategy}-{digest[:12]}"


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _translate(doc: DocumentRecord, config: RunConfig, gateway: Gateway, result: DocumentResult) -> TranslatedDocument:
    strategy = config.strategy_id
    tokenizer = get_tokenizer(config.tokenizer)
    cfg = config.translation_config()
    if strategy is StrategyId.ONE_PASS:
        return translate_single_pass(doc.source_text, config.src_lang, config.tgt_lang, gateway)
    sentences = segment_sentences(doc.source_text, config.src_lang, tokenizer)
    if strategy is StrategyId.SENT_MT:
        return translate_sentence_level(
            doc.source_text, config.src_lang, config.tgt_lang, gateway, sentences=sentences, max_retries=config.retries
        )

    if strategy is StrategyId.FIXED_CHUNKING:
        chunks = fixed_size_chunks(doc.source_text, config.fixed_chunks, sentences=sentences)
    else:
        trace = ChunkingTrace()
        chunks = chunk_document(
            doc.source_text, gateway, config.T,
            language=config.src_lang, tokenizer=tokenizer, sentences=sentences,
            max_retries=config.retries, trace=trace,
        )
        result.windows = trace.windows
    result.chunks = chunks

    graph = None
    if strategy in _GRAPH_STRATEGIES:
        graph = build_graph(chunks, gateway, config.w, max_workers=config.max_workers, max_retries=config.retries)
        result.graph = graph

    if strategy is StrategyId.NO_REL:
        selector = lambda j: sequential_context(j, config.seq_range, chunks)  # noqa: E731
        return translate_document(chunks, None, cfg, gateway, selector=selector, show_relations=False, strategy=strategy.value)
    if strategy is StrategyId.SEQ_CONTEXT:
        selector = lambda j: sequential_context(  # noqa: E731
            j, config.seq_range, chunks, graph=graph, attach_labels=config.seq_attach_labels
        )
        return translate_document(
            chunks, graph, cfg, gateway, selector=selector,
            show_relations=config.seq_attach_labels, strategy=strategy.value,
        )
    return translate_document(chunks, graph, cfg, gateway, strategy=strategy.value)


def _metrics(doc: DocumentRecord, translation: TranslatedDocument, config: RunConfig, ledger: CostLedger) -> dict:
    report = MetricsReport(cost=ledger, bleu_tokenizer=config.tokenizer)
    skipped = {}
    if doc.reference_text is not None:
        try:
            report.d_bleu = d_bleu(translation.text, doc.reference_text, tokenizer=config.tokenizer)
        except MetricError as exc:
            logger.warning("%s: d-BLEU skipped (%s)", doc.id, exc)
            skipped["d_bleu"] = str(exc)
    else:
        skipped["d_bleu"] = "no reference"
    if doc.terms:
        report.terminology_accuracy = terminology_accuracy(translation.text, doc.terms)
    else:
        skipped["terminology_accuracy"] = "no term list"
    out = report.to_dict()
    out["document_id"] = doc.id
    out["strategy"] = config.strategy
    if skipped:
        out["skipped"] = skipped
    return out


def run_document(doc: DocumentRecord, config: RunConfig, backend: Backend, run_dir: Path) -> DocumentResult:
    """Translate one document and write its artifacts; never raises for pipeline errors."""
    doc_dir = run_dir / doc.id
    doc_dir.mkdir(parents=True, exist_ok=True)
    gateway = Gateway(backend, tokenizer=get_tokenizer(config.tokenizer))
    result = DocumentResult(doc.id, "ok", ledger=gateway.ledger)

    def emit(name: str) -> Path:
        result.artifacts[name.split(".")[0] if name != "graph.dot" else "graph_dot"] = f"{doc.id}/{name}"
        return doc_dir / name

    try:
        translation = _translate(doc, config, gateway, result)
    except DocGraphError as exc:
        logger.error("%s: %s", doc.id, exc)
        result.status = "failed"
        result.error = f"{type(exc).__name__}: {exc}"
    if result.chunks:
        write_chunks_jsonl(result.chunks, emit("chunks.jsonl"))
    if result.graph is not None:
        result.graph.save(emit("graph.json"))
        emit("graph.dot").write_text(export_graph_dot(result.graph), encoding="utf-8")
    if result.status == "ok":
        result.translation = translation
        translation.write_jsonl(emit("translations.jsonl"))
        text = translation.text
        emit("output.txt").write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        result.metrics = _metrics(doc, translation, config, gateway.ledger)
    else:
        result.metrics = {"document_id": doc.id, "strategy": config.strategy, "error": result.error,
                          "cost": gateway.ledger.to_dict()}
    _write_json(emit("metrics.json"), result.metrics)
    return result


def run_pipeline(config: RunConfig, collection: list[DocumentRecord], backend: Optional[Backend] = None) -> RunArtifacts:
    """Run ``config.strategy`` over every document and write ``<output_dir>/<run-id>/``.

    Each document gets its own gateway and ledger. The run manifest lists the
    config, per-document and per-stage ledgers, and artifact paths relative to
    the run directory; it holds no timestamps, so identical inputs give
    byte-identical output.
    """
    backend = backend if backend is not None else config.make_backend()
    run_id = make_run_id(config, collection)
    run_dir = Path(config.output_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    if config.doc_workers > 1:
        with ThreadPoolExecutor(max_workers=config.doc_workers) as pool:
            results = list(pool.map(lambda d: run_document(d, config, backend, run_dir), collection))
    else:
        results = [run_document(d, config, backend, run_dir) for d in collection]

    total = CostLedger()
    for r in results:
        total.merge(r.ledger)
    manifest = {
        "run_id": run_id,
        "strategy": config.strategy,
        "config": config.semantic_dict(),
        "collection": [d.id for d in collection],
        "documents": {
            r.doc_id: {
                "status": r.status,
                "error": r.error,
                "artifacts": dict(sorted(r.artifacts.items())),
                "ledger": r.ledger.to_dict(),
                "metrics": {k: v for k, v in r.metrics.items() if k in ("d_bleu", "terminology_accuracy")},
            }
            for r in results
        },
        "ledger": total.to_dict(),
    }
    _write_json(run_dir / RUN_MANIFEST, manifest)
    return RunArtifacts(run_id, run_dir, config, results)


def load_run(run_dir) -> dict:
    path = Path(run_dir)
    if path.is_dir():
        path = path / RUN_MANIFEST
    if not path.is_file():
        raise FileNotFoundError(f"no run manifest at {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    data["_dir"] = os.fspath(path.parent)
    return data
