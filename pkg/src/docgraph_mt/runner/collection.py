"""Document collections: a manifest file or a directory of per-document files."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from docgraph_mt.errors import DuplicateId, ManifestError
from docgraph_mt.metrics import TermPair, read_terms

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class DocumentRecord:
    id: str
    source_text: str
    reference_text: Optional[str] = None
    terms: tuple[TermPair, ...] = field(default_factory=tuple)
    terms_path: Optional[str] = None

    def fingerprint(self) -> str:
        blob = json.dumps(
            [self.id, self.source_text, self.reference_text, [(t.source_term, t.target_term) for t in self.terms]],
            ensure_ascii=False,
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def collection_digest(docs: list[DocumentRecord]) -> str:
    h = hashlib.sha256()
    for d in docs:
        h.update(d.fingerprint().encode("ascii"))
    return h.hexdigest()


def _check_unique(docs: list[DocumentRecord]) -> list[DocumentRecord]:
    seen = set()
    for d in docs:
        if d.id in seen:
            raise DuplicateId(f"document id {d.id!r} appears more than once")
        seen.add(d.id)
    return sorted(docs, key=lambda d: d.id)


def _read(base: Path, rel: Optional[str], what: str, doc_id: str) -> Optional[str]:
    if rel is None:
        return None
    path = base / rel
    if not path.is_file():
        raise ManifestError(f"{what} file for document {doc_id!r} not found: {path}")
    return path.read_text(encoding="utf-8")


def _from_manifest(path: Path) -> list[DocumentRecord]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    entries = data.get("documents") if isinstance(data, dict) else data
    if not isinstance(entries, list):
        raise ManifestError(f"{path}: expected a list of documents")
    base = path.parent
    docs = []
    for n, entry in enumerate(entries):
        if not isinstance(entry, dict) or "id" not in entry:
            raise ManifestError(f"{path}: entry {n} has no id")
        doc_id = str(entry["id"])
        if "source_text" in entry:
            source = entry["source_text"]
        else:
            source = _read(base, entry.get("source"), "source", doc_id)
        if not isinstance(source, str):
            raise ManifestError(f"{path}: document {doc_id!r} has no source text")
        reference = entry.get("reference_text")
        if reference is None:
            reference = _read(base, entry.get("reference"), "reference", doc_id)
        terms_rel = entry.get("terms")
        terms: tuple[TermPair, ...] = ()
        terms_path = None
        if terms_rel is not None:
            terms_path = str(base / terms_rel)
            if not Path(terms_path).is_file():
                raise ManifestError(f"terms file for document {doc_id!r} not found: {terms_path}")
            terms = tuple(read_terms(terms_path))
        docs.append(DocumentRecord(doc_id, source, reference, terms, terms_path))
    return docs


def _from_directory(path: Path) -> list[DocumentRecord]:
    docs = []
    for src in sorted(path.glob("*.source.txt")):
        doc_id = src.name[: -len(".source.txt")]
        ref = path / f"{doc_id}.reference.txt"
        terms_file = path / f"{doc_id}.terms.jsonl"
        docs.append(
            DocumentRecord(
                doc_id,
                src.read_text(encoding="utf-8"),
                ref.read_text(encoding="utf-8") if ref.is_file() else None,
                tuple(read_terms(terms_file)) if terms_file.is_file() else (),
                str(terms_file) if terms_file.is_file() else None,
            )
        )
    if not docs:
        raise ManifestError(f"{path}: no *.source.txt documents and no {MANIFEST_NAME}")
    return docs


def load_collection(path) -> list[DocumentRecord]:
    """Load documents sorted by id.

    ``path`` is a manifest JSON file, a directory holding ``manifest.json``, or
    a directory of ``<id>.source.txt`` files with optional
    ``<id>.reference.txt`` and ``<id>.terms.jsonl`` siblings. Manifest entries
    give ``id`` plus either ``source_text`` or a relative ``source`` path, and
    optionally ``reference``/``reference_text`` and ``terms``.
    """
    p = Path(path)
    if p.is_file():
        return _check_unique(_from_manifest(p))
    if p.is_dir():
        if (p / MANIFEST_NAME).is_file():
            return _check_unique(_from_manifest(p / MANIFEST_NAME))
        return _check_unique(_from_directory(p))
    raise ManifestError(f"collection not found: {path}")
