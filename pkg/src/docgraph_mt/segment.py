"""Rule-based multilingual sentence segmentation.

Sentences end at Latin terminal punctuation followed by whitespace, at CJK
full stops (no following space needed), and at line breaks. A period after a
known abbreviation does not end a sentence. Each sentence's text is stripped;
the whitespace between sentences stays recoverable from the char spans.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from docgraph_mt.errors import EmptyDocument
from docgraph_mt.tokenize import CJK_CLASS, Tokenizer, default_tokenize

_COMMON_ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e",
    "fig", "figs", "eq", "eqs", "no", "vol", "pp", "al", "inc", "ltd", "co", "corp",
    "approx", "cf", "sec", "ch", "ref", "refs", "tab", "dept", "est", "mt", "gen",
}

ABBREVIATIONS: dict[str, frozenset[str]] = {
    "en": frozenset(_COMMON_ABBREVIATIONS),
    "de": frozenset(_COMMON_ABBREVIATIONS | {"z.b", "bzw", "usw", "ca", "nr", "hr", "fr", "dr", "u.a", "d.h", "evtl", "ggf", "vgl"}),
    "fr": frozenset(_COMMON_ABBREVIATIONS | {"m", "mme", "mlle", "p.ex", "env", "cf"}),
    "pt": frozenset(_COMMON_ABBREVIATIONS | {"sr", "sra", "dra", "p.ex", "pág", "núm"}),
    "es": frozenset(_COMMON_ABBREVIATIONS | {"sr", "sra", "dra", "pág", "núm", "ud", "uds"}),
    "ru": frozenset(_COMMON_ABBREVIATIONS | {"т.е", "т.д", "т.п", "др", "г", "гг", "см", "стр", "им"}),
}

_LATIN_END = re.compile(r"[.!?…]+[\"'”’»)\]]*(?=\s|$)")
_CJK_END = re.compile(rf"[。！？]+[」』”’）》]*|[!?](?={CJK_CLASS})")
_NEWLINE = re.compile(r"\n")
_WORD_BEFORE = re.compile(r"(\S+)$")


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    char_span: tuple[int, int]
    token_count: int = 0


def abbreviations_for(language: str) -> frozenset[str]:
    return ABBREVIATIONS.get(language.lower().split("-")[0], ABBREVIATIONS["en"])


def _is_abbreviation(document: str, dot_pos: int, abbrevs: frozenset[str]) -> bool:
    m = _WORD_BEFORE.search(document, 0, dot_pos)
    if not m:
        return False
    word = m.group(1).lstrip("(\"'“‘«[").lower()
    return word in abbrevs


def _boundaries(document: str, language: str) -> list[int]:
    abbrevs = abbreviations_for(language)
    ends = set()
    for m in _LATIN_END.finditer(document):
        punct = m.group(0)
        if punct[0] == "." and len(punct.rstrip("\"'”’»)]")) == 1:
            if _is_abbreviation(document, m.start(), abbrevs):
                continue
        ends.add(m.end())
    for m in _CJK_END.finditer(document):
        ends.add(m.end())
    for m in _NEWLINE.finditer(document):
        ends.add(m.start())
    ends.add(len(document))
    return sorted(ends)


def segment_sentences(
    document: str,
    language: str = "en",
    tokenizer: Tokenizer = default_tokenize,
) -> list[Sentence]:
    if not document.strip():
        raise EmptyDocument("document is empty")
    sentences: list[Sentence] = []
    start = 0
    for end in _boundaries(document, language):
        if end <= start:
            continue
        piece = document[start:end]
        stripped = piece.strip()
        if stripped:
            lead = len(piece) - len(piece.lstrip())
            s = start + lead
            span = (s, s + len(stripped))
            sentences.append(Sentence(len(sentences), stripped, span, len(tokenizer(stripped))))
        start = end
    return sentences
