import pytest

from docgraph_mt.errors import EmptyDocument
from docgraph_mt.segment import segment_sentences
from docgraph_mt.tokenize import char_tokenize, default_tokenize, get_tokenizer, is_cjk_language, whitespace_tokenize


def texts(doc, lang="en"):
    return [s.text for s in segment_sentences(doc, lang)]


def test_terminal_punctuation():
    assert texts("A. B? C!") == ["A.", "B?", "C!"]


def test_cjk_full_stop():
    assert texts("他走了。她来了。", "zh") == ["他走了。", "她来了。"]


def test_abbreviation_guard():
    assert texts("Dr. Smith left. He returned.") == ["Dr. Smith left.", "He returned."]


def test_german_abbreviation():
    assert len(segment_sentences("Das ist z.B. gut. Und dann?", "de")) == 2


def test_newlines_split_headings():
    assert texts("Title\nFirst sentence. Second one.") == ["Title", "First sentence.", "Second one."]


def test_spans_index_into_document():
    doc = "  One two.  Three four!\nFive"
    for s in segment_sentences(doc):
        a, b = s.char_span
        assert doc[a:b] == s.text


def test_empty_document():
    with pytest.raises(EmptyDocument):
        segment_sentences("   \n ")


def test_token_counts():
    (s,) = segment_sentences("Hello world.")
    assert s.token_count == 3


def test_default_tokenizer_splits_cjk_per_character():
    assert default_tokenize("模型 model。") == ["模", "型", "model", "。"]
    assert default_tokenize("don't") == ["don", "'", "t"]


def test_other_tokenizers():
    assert whitespace_tokenize(" a  b\nc ") == ["a", "b", "c"]
    assert char_tokenize("a b") == ["a", "b"]
    assert get_tokenizer("whitespace") is whitespace_tokenize
    with pytest.raises(ValueError):
        get_tokenizer("nope")
    assert is_cjk_language("zh") and is_cjk_language("ja-JP") and not is_cjk_language("de")
