from pathlib import Path

import pytest

from docgraph_mt.cohesion import (
    AnnotationSpan,
    EvalAttrs,
    build_annotation_prompt,
    build_evaluation_prompt,
    evaluate_cohesion,
    parse_annotations,
    score_annotated_file,
    score_cohesion,
    strip_annotations,
    write_cohesion_json,
)
from docgraph_mt.errors import EmptyDocument, EmptySpanList, InvalidAttribute, MalformedSpan, MissingEvalAttrs
from docgraph_mt.llm import Gateway, ScriptedBackend, SyntheticBackend

COHESION = Path(__file__).parent / "fixtures" / "cohesion"
PRONOUN_GRADED = (COHESION / "pronoun_evaluation.txt").read_text(encoding="utf-8").strip()
CONJ_GRADED = (COHESION / "conjunction_evaluation.txt").read_text(encoding="utf-8").strip()
PRONOUN_SOURCE = "Tom and his sister went to the park. She found a ball and he picked it up. They decided to play together."
PRONOUN_TRANSLATION = "Tom und seine Schwester gingen in den Park. Er fand einen Ball und er hob ihn auf. waren glucklich zusammen zu spielen."
CONJ_SOURCE = strip_annotations(CONJ_GRADED, "conjunction")


def test_annotation_prompts():
    req = build_annotation_prompt("He left.", "coreference")
    assert req.tag == "judge"
    for name in ("personal", "possessive", "demonstrative", "reflexive", "relative"):
        assert name in req.user_text
    assert "He left." in req.user_text
    conj = build_annotation_prompt("But no.", "conjunction")
    assert '[conjunction]<type="' in conj.user_text
    with pytest.raises(EmptyDocument):
        build_annotation_prompt("  ", "coreference")
    with pytest.raises(ValueError):
        build_annotation_prompt("x", "style")


def test_evaluation_prompts():
    annotated = '[He]<type="personal" referent="John"> left.'
    req = build_evaluation_prompt(annotated, "Er ging.", "coreference")
    assert annotated in req.user_text and "Er ging." in req.user_text
    assert "target_translation" in req.user_text and "is_correct" in req.user_text
    conj = build_evaluation_prompt('[But]<type="coordinating" relationship="contrast"> no.', "Aber nein.", "conjunction")
    assert "Aber nein." in conj.user_text
    with pytest.raises(MalformedSpan):
        build_evaluation_prompt('[He]<type="personal" left.', "Er ging.", "coreference")


def test_parse_single_annotation():
    (span,) = parse_annotations('[He]<type="personal" referent="John">', "coreference").spans
    assert span == AnnotationSpan("He", "pronoun", {"type": "personal", "referent": "John"})


def test_parse_graded_annotation():
    text = '[She]<type="personal" referent="his sister" target_translation="Er" is_correct="false" error_type="wrong_referent">'
    (span,) = parse_annotations(text, "coreference", expect_eval_attrs=True).spans
    assert span.eval_attrs == EvalAttrs("Er", False, "wrong_referent")
    assert span.attrs["referent"] == "his sister"


@pytest.mark.parametrize(
    "text, dimension",
    [
        ('[it]<type="personal" target_translation="omitted" is_correct="false" error_type="null">', "coreference"),
        ('[it]<type="personal" target_translation="missing" is_correct="true" error_type="null">', "coreference"),
        ('[and]<type="coordinating" target_translation="omitted" is_correct="true" error_type="null">', "conjunction"),
        ('[it]<type="personal" colour="red">', "coreference"),
        ('[it]<type="nominal">', "coreference"),
        ('[it]<type="personal" target_translation="es">', "coreference"),
        ('[it]<type="personal" target_translation="es" is_correct="maybe" error_type="null">', "coreference"),
        ('[it]<referent="x">', "coreference"),
        ('[it]<type="personal" type="personal">', "coreference"),
    ],
)
def test_invalid_attributes(text, dimension):
    with pytest.raises(InvalidAttribute):
        parse_annotations(text, dimension)


def test_omitted_pronoun_is_correct():
    text = '[it]<type="personal" referent="x" target_translation="omitted" is_correct="true" error_type="null">'
    (span,) = parse_annotations(text, "coreference").spans
    assert span.eval_attrs.is_correct


@pytest.mark.parametrize(
    "text",
    [
        '[He]<type="personal" referent="John" left.',
        '[He [she]<type="personal">]<type="personal">',
        '[]<type="personal">',
        '[He]<type=personal>',
    ],
)
def test_malformed_spans(text):
    with pytest.raises(MalformedSpan):
        parse_annotations(text, "coreference")


def test_plain_brackets_are_text():
    parsed = parse_annotations("See [1] and [He]<type=\"personal\"> too.", "coreference")
    assert len(parsed.spans) == 1
    assert parsed.plain_text == "See [1] and He too."


def test_stripping_removes_all_markup():
    plain = strip_annotations(PRONOUN_GRADED, "coreference")
    assert plain == PRONOUN_SOURCE
    assert "<" not in plain and "[" not in plain


def test_round_trip_on_fixtures_and_canonical_render():
    for path in COHESION.glob("*.txt"):
        text = path.read_text(encoding="utf-8")
        dim = "coreference" if path.name.startswith("pronoun") else "conjunction"
        parsed = parse_annotations(text, dim)
        assert parsed.render() == text
        for span in parsed.spans:
            assert span.render() == span.raw


def test_scores():
    spans = parse_annotations(PRONOUN_GRADED, "coreference", expect_eval_attrs=True).spans
    perfect = [AnnotationSpan(s.surface, s.kind, s.attrs, EvalAttrs("x", True, "null")) for s in spans[:4]]
    assert score_cohesion(perfect).accuracy == 100.0
    score = score_cohesion(spans)
    assert score.accuracy == 60.0
    assert sum(score.error_breakdown.values()) == score.total - score.correct
    with pytest.raises(EmptySpanList):
        score_cohesion([])
    with pytest.raises(MissingEvalAttrs):
        score_cohesion([AnnotationSpan("he", "pronoun", {"type": "personal"})])
    with pytest.raises(MissingEvalAttrs):
        parse_annotations('[he]<type="personal">', "coreference", expect_eval_attrs=True)


def test_conjunction_score():
    score = score_annotated_file(CONJ_GRADED, "conjunction")
    assert (score.total, score.correct, score.accuracy) == (5, 3, 60.0)
    assert score.error_breakdown == {"redundant_conjunction": 1, "wrong_conjunction": 1}
    assert score.unrecognized_error_types == []


def test_unknown_error_types_are_tallied_separately():
    text = '[he]<type="personal" referent="x" target_translation="sie" is_correct="false" error_type="number_mismatch">'
    score = score_annotated_file(text, "coreference")
    assert score.unrecognized_error_types == ["number_mismatch"]


def judge_backend(source_annotated, graded):
    return ScriptedBackend([
        {"tag": "judge", "ordinal": 0, "response": source_annotated},
        {"tag": "judge", "ordinal": 1, "response": "```\n" + graded + "\n```"},
    ])


def pronoun_annotation():
    spans = parse_annotations(PRONOUN_GRADED, "coreference").segments
    return "".join(s if isinstance(s, str) else AnnotationSpan(s.surface, s.kind, s.attrs).render() for s in spans)


def test_evaluate_end_to_end_coreference():
    gw = Gateway(judge_backend(pronoun_annotation(), PRONOUN_GRADED))
    score = evaluate_cohesion(PRONOUN_SOURCE, PRONOUN_TRANSLATION, "coreference", gw)
    assert score.accuracy == 60.0 and not score.anchor_mismatch
    assert gw.ledger.stage("judge").calls == 2


def test_evaluate_end_to_end_conjunction():
    annotated = "".join(
        s if isinstance(s, str) else AnnotationSpan(s.surface, s.kind, s.attrs).render()
        for s in parse_annotations(CONJ_GRADED, "conjunction").segments
    )
    score = evaluate_cohesion(CONJ_SOURCE, "Das Wetter war schlecht, so ...", "conjunction",
                              Gateway(judge_backend(annotated, CONJ_GRADED)))
    assert score.accuracy == 60.0


def test_anchor_mismatch_is_flagged():
    gw = Gateway(judge_backend(pronoun_annotation(), PRONOUN_GRADED))
    score = evaluate_cohesion("A different source text entirely.", PRONOUN_TRANSLATION, "coreference", gw)
    assert score.anchor_mismatch


def test_synthetic_judge_round_trip(tmp_path):
    gw = Gateway(SyntheticBackend())
    score = evaluate_cohesion(PRONOUN_SOURCE, PRONOUN_TRANSLATION, "coreference", gw)
    assert score.total == 5 and score.accuracy == 100.0 and not score.anchor_mismatch
    conj = evaluate_cohesion("It rained, but we went because we could.", "x", "conjunction", gw)
    assert conj.total == 2
    path = tmp_path / "cohesion.json"
    write_cohesion_json({"coreference": score, "conjunction": conj}, path)
    assert '"accuracy": 100.0' in path.read_text()
