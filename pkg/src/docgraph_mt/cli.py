"""Command-line entry point: ``docgraph <verb> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from docgraph_mt import cohesion
from docgraph_mt.chunker import ChunkingTrace, chunk_document, read_chunks_jsonl, write_chunks_jsonl
from docgraph_mt.errors import DocGraphError
from docgraph_mt.graph import DiscourseGraph, build_graph, export_graph_dot
from docgraph_mt.llm import Gateway
from docgraph_mt.metrics import d_bleu, ingest_external_scores, read_terms, terminology_accuracy
from docgraph_mt.runner import RunConfig, compare_runs, load_collection, run_pipeline
from docgraph_mt.tokenize import TOKENIZERS, get_tokenizer

# CLI flag -> RunConfig field
_CONFIG_FLAGS = {
    "strategy": "strategy",
    "src_lang": "src_lang",
    "tgt_lang": "tgt_lang",
    "T": "T",
    "w": "w",
    "cap": "cap",
    "backend": "backend",
    "endpoint": "endpoint",
    "model": "model",
    "tokenizer": "tokenizer",
    "out": "output_dir",
    "on_error": "on_error",
    "prefer": "prefer",
    "fixed_chunks": "fixed_chunks",
    "seq_range": "seq_range",
    "seq_attach_labels": "seq_attach_labels",
    "retries": "retries",
    "max_workers": "max_workers",
    "doc_workers": "doc_workers",
    "seed": "seed",
}


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON or YAML file with RunConfig fields")
    g.add_argument("--strategy", choices=["sent_mt", "one_pass", "transgraph", "fixed_chunking", "no_rel", "seq_context"])
    g.add_argument("--src-lang", dest="src_lang")
    g.add_argument("--tgt-lang", dest="tgt_lang")
    g.add_argument("-T", type=int, help="chunking window in tokens (default 100)")
    g.add_argument("-w", type=int, help="maximum chunk distance for relation pairs (default 10)")
    g.add_argument("--cap", type=int, help="context records per chunk (default 5)")
    g.add_argument("--backend", help="synthetic | http | mock:<fixture.jsonl>")
    g.add_argument("--endpoint")
    g.add_argument("--model")
    g.add_argument("--tokenizer", choices=sorted(TOKENIZERS))
    g.add_argument("--out", help="output directory")
    g.add_argument("--on-error", dest="on_error", choices=["halt", "skip"])
    g.add_argument("--prefer", choices=["nearest", "earliest"])
    g.add_argument("--fixed-chunks", dest="fixed_chunks", type=int)
    g.add_argument("--seq-range", dest="seq_range", type=int)
    g.add_argument("--no-seq-labels", dest="seq_attach_labels", action="store_const", const=False)
    g.add_argument("--retries", type=int)
    g.add_argument("--max-workers", dest="max_workers", type=int)
    g.add_argument("--doc-workers", dest="doc_workers", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="docgraph", description="Discourse-graph guided document translation.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("chunk", parents=[common], help="split a document into chunks")
    p.add_argument("source", help="source document (text file)")

    p = sub.add_parser("graph", parents=[common], help="build the discourse graph of a document")
    p.add_argument("source")
    p.add_argument("--chunks", help="reuse an existing chunks.jsonl instead of chunking")
    p.add_argument("--plot", action="store_true", help="also write a relation-distance histogram")

    p = sub.add_parser("translate", parents=[common], help="run a strategy over a collection")
    p.add_argument("collection", help="manifest.json or collection directory")

    p = sub.add_parser("evaluate", parents=[common], help="score a translation")
    p.add_argument("hypothesis")
    p.add_argument("--reference")
    p.add_argument("--terms", help="JSONL term pairs")
    p.add_argument("--scores", help="JSONL externally computed scores to average")

    p = sub.add_parser("cohesion", parents=[common], help="LLM-as-judge cohesion scores")
    p.add_argument("--source")
    p.add_argument("--translation")
    p.add_argument("--dimension", choices=["coreference", "conjunction", "both"], default="both")
    p.add_argument("--annotated", help="score an already graded annotation file without a judge call")

    p = sub.add_parser("compare", parents=[common], help="compare two runs (CSV + figure)")
    p.add_argument("run_a")
    p.add_argument("run_b")

    p = sub.add_parser("export-dot", parents=[common], help="print a graph.json as DOT")
    p.add_argument("graph")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {field: getattr(args, flag) for flag, field in _CONFIG_FLAGS.items() if getattr(args, flag, None) is not None}
    return base.replace(**overrides)


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _gateway(config: RunConfig) -> Gateway:
    return Gateway(config.make_backend(), tokenizer=get_tokenizer(config.tokenizer))


def _chunk(config: RunConfig, source: str, gateway: Gateway):
    trace = ChunkingTrace()
    text = Path(source).read_text(encoding="utf-8")
    chunks = chunk_document(
        text, gateway, config.T, language=config.src_lang,
        tokenizer=get_tokenizer(config.tokenizer), max_retries=config.retries, trace=trace,
    )
    return chunks, trace


def cmd_chunk(args, config: RunConfig) -> int:
    chunks, trace = _chunk(config, args.source, _gateway(config))
    path = _out_dir(config) / "chunks.jsonl"
    write_chunks_jsonl(chunks, path)
    print("chunk_id\tsentences\ttokens")
    for c in chunks:
        print(f"{c.id}\t{c.sentence_indices[0]}-{c.sentence_indices[-1]}\t{c.token_count}")
    print(f"# {len(chunks)} chunks from {trace.windows} windows -> {path}", file=sys.stderr)
    return 0


def cmd_graph(args, config: RunConfig) -> int:
    gateway = _gateway(config)
    if args.chunks:
        chunks = read_chunks_jsonl(args.chunks)
    else:
        chunks, _ = _chunk(config, args.source, gateway)
    graph = build_graph(chunks, gateway, config.w, max_workers=config.max_workers, max_retries=config.retries)
    out = _out_dir(config)
    if not args.chunks:
        write_chunks_jsonl(chunks, out / "chunks.jsonl")
    graph.save(out / "graph.json")
    (out / "graph.dot").write_text(export_graph_dot(graph), encoding="utf-8")
    print("src\tdst\tlabel\tdistance")
    for e in graph.edges:
        print(f"{e.src}\t{e.dst}\t{e.label.value}\t{e.distance}")
    if args.plot:
        from docgraph_mt.runner.report import plot_relation_distances

        plot_relation_distances(graph, out / "relation_distances.png")
    return 0


def cmd_translate(args, config: RunConfig) -> int:
    docs = load_collection(args.collection)
    run = run_pipeline(config, docs)
    print("document_id\tstatus\tcalls\ttotal_tokens\td_bleu\tterminology_accuracy")
    for d in run.documents:
        bleu = d.metrics.get("d_bleu")
        term = d.metrics.get("terminology_accuracy")
        print(
            f"{d.doc_id}\t{d.status}\t{d.ledger.calls}\t{d.ledger.total_tokens()}\t"
            f"{'' if bleu is None else f'{bleu:.2f}'}\t{'' if term is None else f'{term:.4f}'}"
        )
    print(f"# run {run.run_id} -> {run.run_dir}", file=sys.stderr)
    return 1 if run.failed else 0


def cmd_evaluate(args, config: RunConfig) -> int:
    hyp = Path(args.hypothesis).read_text(encoding="utf-8")
    result: dict = {}
    if args.reference:
        result["d_bleu"] = d_bleu(hyp, Path(args.reference).read_text(encoding="utf-8"), tokenizer=config.tokenizer)
    if args.terms:
        result["terminology_accuracy"] = terminology_accuracy(hyp, read_terms(args.terms))
    if args.scores:
        result["external_scores"] = ingest_external_scores(args.scores)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def cmd_cohesion(args, config: RunConfig) -> int:
    dims = ["coreference", "conjunction"] if args.dimension == "both" else [args.dimension]
    scores = {}
    if args.annotated:
        if len(dims) != 1:
            raise SystemExit("--annotated needs a single --dimension")
        scores[dims[0]] = cohesion.score_annotated_file(Path(args.annotated).read_text(encoding="utf-8"), dims[0])
    else:
        if not (args.source and args.translation):
            raise SystemExit("--source and --translation are required without --annotated")
        source = Path(args.source).read_text(encoding="utf-8")
        translation = Path(args.translation).read_text(encoding="utf-8")
        gateway = _gateway(config)
        for dim in dims:
            scores[dim] = cohesion.evaluate_cohesion(source, translation, dim, gateway)
    cohesion.write_cohesion_json(scores, _out_dir(config) / "cohesion.json")
    print("dimension\ttotal\tcorrect\taccuracy\tanchor_mismatch")
    for dim, s in scores.items():
        print(f"{dim}\t{s.total}\t{s.correct}\t{s.accuracy:.2f}\t{str(s.anchor_mismatch).lower()}")
    return 0


def cmd_compare(args, config: RunConfig) -> int:
    from docgraph_mt.runner.report import plot_comparison

    report = compare_runs(args.run_a, args.run_b)
    out = _out_dir(config)
    text = report.to_csv()
    (out / "comparison.csv").write_text(text, encoding="utf-8")
    plot_comparison(report, out / "comparison.png")
    sys.stdout.write(text)
    return 0


def cmd_export_dot(args, config: RunConfig) -> int:
    sys.stdout.write(export_graph_dot(DiscourseGraph.load(args.graph)))
    return 0


COMMANDS = {
    "chunk": cmd_chunk,
    "graph": cmd_graph,
    "translate": cmd_translate,
    "evaluate": cmd_evaluate,
    "cohesion": cmd_cohesion,
    "compare": cmd_compare,
    "export-dot": cmd_export_dot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        return COMMANDS[args.verb](args, config)
    except (DocGraphError, ValueError, OSError) as exc:
        print(f"docgraph: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
