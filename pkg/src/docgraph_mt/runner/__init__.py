from docgraph_mt.runner.collection import DocumentRecord, collection_digest, load_collection
from docgraph_mt.runner.compare import ComparisonReport, ComparisonRow, compare_runs
from docgraph_mt.runner.config import RunConfig
from docgraph_mt.runner.pipeline import DocumentResult, RunArtifacts, load_run, make_run_id, run_document, run_pipeline

__all__ = [
    "ComparisonReport",
    "ComparisonRow",
    "DocumentRecord",
    "DocumentResult",
    "RunArtifacts",
    "RunConfig",
    "collection_digest",
    "compare_runs",
    "load_collection",
    "load_run",
    "make_run_id",
    "run_document",
    "run_pipeline",
]
