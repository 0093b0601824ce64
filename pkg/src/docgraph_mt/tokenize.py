"""Deterministic token counting used for window bookkeeping and d-BLEU.

The default tokenizer splits text into maximal alphanumeric runs, emits every
other non-space character as its own token, and treats each CJK character
(Han, kana, Hangul) as a single token.
"""

from __future__ import annotations

import re
from typing import Callable

CJK_CLASS = (
    "["
    "ᄀ-ᇿ"  # Hangul Jamo
    "⺀-⿟"  # CJK radicals
    "぀-ヿ"  # Hiragana, Katakana
    "㄀-ㄯ"
    "㄰-㆏"
    "ㆠ-ㇿ"
    "㐀-䶿"
    "一-鿿"
    "가-힯"  # Hangul syllables
    "豈-﫿"
    "\U00020000-\U0002ffff"
    "]"
)

_CJK_RE = re.compile(CJK_CLASS)
_DEFAULT_RE = re.compile(rf"{CJK_CLASS}|(?:(?!{CJK_CLASS})[^\W_])+|\S")

Tokenizer = Callable[[str], list[str]]


def default_tokenize(text: str) -> list[str]:
    return _DEFAULT_RE.findall(text)


def whitespace_tokenize(text: str) -> list[str]:
    return text.split()


def char_tokenize(text: str) -> list[str]:
    return [ch for ch in text if not ch.isspace()]


TOKENIZERS: dict[str, Tokenizer] = {
    "default": default_tokenize,
    "whitespace": whitespace_tokenize,
    "char": char_tokenize,
}


def get_tokenizer(name: str = "default") -> Tokenizer:
    try:
        return TOKENIZERS[name]
    except KeyError:
        raise ValueError(f"unknown tokenizer {name!r}; choose from {sorted(TOKENIZERS)}") from None


def estimate_tokens(text: str, tokenizer: Tokenizer = default_tokenize) -> int:
    return len(tokenizer(text))


def contains_cjk(text: str) -> bool:
    return _CJK_RE.search(text) is not None


CJK_LANGUAGES = frozenset({"zh", "ja", "ko", "yue"})


def is_cjk_language(code: str) -> bool:
    """True for Chinese, Japanese, Korean and Cantonese codes, region subtags ignored."""
    return code.lower().replace("_", "-").split("-")[0] in CJK_LANGUAGES
