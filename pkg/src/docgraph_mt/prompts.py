"""Prompt templates for every LLM stage and the helpers that fill them.

Placeholders are ``{name}``; substitution is a single regex pass so that
document text containing brace sequences is never re-expanded.
"""

from __future__ import annotations

import re
from typing import Iterable, Mapping, Optional

LANGUAGE_NAMES = {
    "en": "English",
    "zh": "Chinese",
    "de": "German",
    "ja": "Japanese",
    "fr": "French",
    "pt": "Portuguese",
    "ru": "Russian",
    "es": "Spanish",
    "it": "Italian",
    "ko": "Korean",
}

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


def render(template: str, **values: object) -> str:
    def sub(m: re.Match) -> str:
        key = m.group(1)
        return str(values[key]) if key in values else m.group(0)

    return _PLACEHOLDER.sub(sub, template)


def language_name(code: str) -> str:
    return LANGUAGE_NAMES.get(code.lower(), code)


CHUNKING_TEMPLATE = """You are a document chunker. Here is an (incomplete) part of a long document:
{chunk_content}

Split the given text into contiguous, sentence-preserving chunks with coherent, adjacent sentences only. Remember to: (i) never split a sentence, (ii) keep topically related, adjacent sentences together, and (iii) if the last sentence is incomplete, do NOT output it - mark it as carry_over.

Return ONLY valid JSON with this schema:
{
  "chunks": [
    {
      "chunk_id": "<int|string>",
      "rationale": "<2 short sentences on why you choose the following sentences for this chunk>",
      "sentence_indices": [<ints, in order>],
      "carry_over": <true|false>
    }
  ]
}"""

RELATION_TEMPLATE = """You are a text relation analyzer. Your task is to examine two chunks of text, taken from the same document, **Chunk {i}** and **Chunk {j}** and determine if they share any meaningful connection. Only define a relation when there truly is one; if the two chunks are topically or semantically independent, indicate that explicitly.

### Instructions

1. **Identify a Relation (if any)**
   - Read **Chunk {j}** (the later chunk) and **Chunk {i}** (an earlier chunk).
   - Ask yourself:
     - Do they refer to the same entities, events, or ideas?
     - Does Chunk {j} expand, clarify, contrast, or provide background for something in Chunk {i}?
     - Does one chunk continue a thought begun in the other (e.g., cause -> effect, premise -> conclusion)?
   - If there is an explicit connection, choose the most precise descriptor from the following categories:
     - **Background->Core** ("Chunk {i} provides necessary background for Chunk {j}")
     - **Core->Detail** ("Chunk {j} drills down into a specific subpoint that Chunk {i} introduced")
     - **Motivation->Method or Problem->Solution** ("Chunk {i} states a problem; Chunk {j} describes the solution.")
     - **Cause->Effect** (e.g., "Chunk {i} describes an experiment; Chunk {j} shows the resulting performance drop.")
     - **Contrast** (e.g., "Chunk {j} explicitly contrasts with Chunk {i}'s claim.")
     - **Comparison** (e.g., "Both chunks compare two architectures.")
     - **Condition** (e.g., "Chunk {i} says 'if X, then Y,' and Chunk {j} describes what happens under that condition.")
     - **Evaluation** (e.g., "Chunk {j} evaluates the approach introduced in Chunk {i}.")
     - **Entity Coreference** ("Both chunks mention the same dataset, model, or variable.")
     - **Terminology Definition** ("Chunk {i} defines a term that appears in Chunk {j}.")

2. **Output Format**
   - Output strictly a dictionary with keys: reason, relation, direction. Reason is a short explanation for the relation. If the relation is 'none', reason should be 'no relation found'. Direction is the direction of the relation, which can be 'forward' or 'backward'.
   - **Do not** include any extra commentary, annotations, or keys. Only the dictionary should be returned.

# Chunk {i}:
{chunk_i}
# Chunk {j}:
{chunk_j}

Your response:"""

TRANSLATION_TEMPLATE = """You are a high-quality translation assistant. Your task is to translate one specific chunk of the source document from {src_lang} into {tgt_lang}, using the following context to ensure consistent terminology, style, and meaning.

A. RELATED CHUNKS (and WHY THEY MATTER)

Below are all chunks that share a meaningful connection with the "Current Chunk."
For each related chunk, you have:
  - Its "Chunk ID" (an integer).
  - The full source-language text of that chunk.
  - The detected relation-type between that chunk and the current one.
  - A brief "Reason" sentence explaining why this relation helps guide terminology or meaning in the current chunk.

Use these related-chunk definitions to preserve consistent translations of any key terms or ideas that overlap.

{related_chunks}

B. CURRENT CHUNK TO TRANSLATE

Chunk ID: {chunk_id}

Source Text:
{chunk_text}

C. SPECIFIC INSTRUCTIONS

1. **Consistent Terminology:**
   - If any key term has been introduced or defined in a Related Chunk, use **exactly the same target-language rendering** here.
   - If a Related Chunk indicates an acronym expansion, be sure to translate the acronym and its expanded form consistently (following how it was rendered earlier).

2. **Preserve Coreference & Referential Integrity:**
   - If the Current Chunk refers back to an entity or concept defined earlier, ensure you use the same translation for that concept-exactly as in the Related Chunk's translation.

3. **Translate Only the Current Chunk:**
   - Do not attempt to retranslate the entire document or other chunks.
   - Your output should be **only** the translated text of {chunk_id}.
   - Do **not** include any commentary, footnotes, or explanations-just the final translation block.

4. **Formatting:**
   - Keep paragraph breaks as in the source.
   - If the source chunk has multiple paragraphs, translate each paragraph and preserve line breaks.
   - If the source chunk contains inline code, variable names, or labels, keep them in-English or code-style without adding extra formatting.


D. OUTPUT

Provide **only** the translated text of Chunk {chunk_id} in {tgt_lang}, respecting all the instructions above."""

# used by the sentence-level and single-pass baselines
PLAIN_TRANSLATION_TEMPLATE = """Translate the following {unit} from {src_lang} into {tgt_lang}. Keep line breaks as in the source. Output only the translation, with no commentary.

Source Text:
{text}"""

NO_RELATED_CHUNKS = "(none)"


def format_related_chunks(records: Iterable, *, show_relations: bool = True) -> str:
    """Render context records (objects with neighbor_id, neighbor_text, label, reason)."""
    blocks = []
    for rec in records:
        lines = [f"Chunk ID: {rec.neighbor_id}"]
        if show_relations and rec.label is not None:
            lines.append(f"Relation: {rec.label}")
            if rec.reason:
                lines.append(f"Reason: {rec.reason}")
        lines.append("Text:")
        lines.append(rec.neighbor_text)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) if blocks else NO_RELATED_CHUNKS


_SOURCE_RE = re.compile(r"Source Text:\n(.*?)(?:\n\nC\. SPECIFIC INSTRUCTIONS|\Z)", re.DOTALL)


def extract_source_text(prompt: str) -> str:
    """Recover the text to translate from a translation prompt (used by mocks)."""
    start = prompt.find("B. CURRENT CHUNK TO TRANSLATE")
    m = _SOURCE_RE.search(prompt, max(start, 0))
    return m.group(1) if m else ""


# --- cohesion judge prompts -------------------------------------------------

ROLE_DEFINITION = (
    "You are an expert linguist who annotates discourse phenomena and grades "
    "translations with precise, reproducible judgements."
)

COREFERENCE_ANNOTATION_TEMPLATE = """# Source Pronoun Annotation
{role}
## Task Definition
**Pronouns** are words that refer to entities mentioned elsewhere in the text or understood from context, including:
- **Personal pronouns**: I, you, he, she, it, we, they, me, him, her, us, them
- **Possessive pronouns**: my, your, his, her, its, our, their, mine, yours, hers, ours, theirs
- **Demonstrative pronouns**: this, that, these, those (when used as pronouns, not determiners)
- **Reflexive pronouns**: myself, yourself, himself, herself, itself, ourselves, yourselves, themselves
- **Relative pronouns**: who, whom, whose, which, that (when introducing relative clauses)

## Annotation Instructions

### Step 1: Read the entire document
Understand the content, identify all entities, and track referential relationships throughout the text.

### Step 2: Identify ALL pronouns
Scan systematically through the document for every pronoun that refers to a specific entity or concept.

### Step 3: Determine pronoun type and referent
- Classify the grammatical type of each pronoun
- Identify what specific entity or concept each pronoun refers to

### Step 4: Apply inline annotation
First copy each pronoun exactly as it appears in the original text, then add the attributes after it.

## Annotation Format
Use this exact format:
```
[pronoun]<type="[pronoun_type]" referent="[what_it_refers_to]">
```

**Attribute specifications:**
- `type`: One of: `personal`, `possessive`, `demonstrative`, `reflexive`, `relative`
- `referent`: The specific noun phrase or concept that this pronoun refers to

## Pronoun Type Guidelines

- **personal**: I, you, he, she, it, we, they, me, him, her, us, them
- **possessive**: my, your, his, her, its, our, their, mine, yours, hers, ours, theirs
- **demonstrative**: this, that, these, those
- **reflexive**: myself, yourself, himself, herself, itself, ourselves, yourselves, themselves
- **relative**: who, whom, whose, which, that

## Examples

### Example 1 (Basic Pronouns):

**Source document**:
```
John bought a new car yesterday. He drove it to work this morning. Mary saw him and thought the car was beautiful. She told him that she liked it very much.
```

**Expected Output**:
```
John bought a new car yesterday. [He]<type="personal" referent="John"> drove [it]<type="personal" referent="a new car"> to work this morning. Mary saw [him]<type="personal" referent="John"> and thought the car was beautiful. [She]<type="personal" referent="Mary"> told [him]<type="personal" referent="John"> that [she]<type="personal" referent="Mary"> liked [it]<type="personal" referent="the car"> very much.
```

## Source document
```
{document}
```

Return only the annotated document."""

CONJUNCTION_ANNOTATION_TEMPLATE = """# Source Conjunction Annotation
{role}
## Task Definition
**Conjunctive expressions** are words or phrases that signal logical relationships between clauses or sentences, including:
- **Coordinating conjunctions**: and, but, or, nor, for, so, yet
- **Subordinating conjunctions**: because, since, although, while, if, when, before, after, unless, etc.
- **Conjunctive adverbs**: however, therefore, furthermore, meanwhile, consequently, nevertheless, moreover, etc.
- **Transitional phrases**: in addition, on the other hand, as a result, for example, in contrast, etc.
- **Correlative conjunctions**: both...and, either...or, not only...but also, etc.

## Annotation Instructions
### Step 1: Read the entire document
Understand the content and identify the logical flow and relationships between clauses and sentences.

### Step 2: Identify ALL conjunctive expressions
Scan systematically through the document for every word or phrase that connects ideas or shows logical relationships.

### Step 3: Determine conjunction type and logical relationship
- Classify the grammatical type of each conjunctive expression
- Identify what type of logical connection it signals

### Step 4: Apply inline annotation
First copy each conjunctive expression exactly as it appears in the original text, then add the attributes after it.

## Annotation Format
Use this exact format:
```
[conjunction]<type="[conjunction_type]" relationship="[logical_relationship]">
```

**Attribute specifications:**
- `type`: One of: `coordinating`, `subordinating`, `conjunctive_adverb`, `transitional_phrase`, `correlative`
- `relationship`: One of the logical relationship categories listed below

## Logical Relationship Categories
- **addition**: adding information (and, furthermore, moreover, in addition)
- **contrast**: opposing information (but, however, in contrast)
- **concession**: conceding a point (although, though, nevertheless)
- **cause**: giving a reason (because, since)
- **result**: stating a consequence (so, therefore, as a result)
- **sequence**: ordering events (first, then, after)
- **condition**: stating a condition (if, unless)
- **example**: illustrating (for example, for instance)

## Conjunction Type Guidelines

- **coordinating**: and, but, or, nor, for, so, yet
- **subordinating**: because, since, although, while, if, when, before, after, unless, though, whereas, etc.
- **conjunctive_adverb**: however, therefore, furthermore, meanwhile, consequently, nevertheless, moreover, etc.
- **transitional_phrase**: in addition, on the other hand, as a result, for example, in contrast, etc.
- **correlative**: both...and, either...or, not only...but also, etc.

## Examples

### Example 1 (Basic Conjunctions):

**Source document**:
```
John was tired, but he had to continue working. Therefore, he decided to have a cup of coffee. He drank it quickly and felt more energetic.
```
**Expected Output**:
```
John was tired, [but]<type="coordinating" relationship="contrast"> he had to continue working. [Therefore]<type="conjunctive_adverb" relationship="result">, he decided to have a cup of coffee. He drank it quickly [and]<type="coordinating" relationship="addition"> felt more energetic.
```

## Source document
```
{document}
```

Return only the annotated document."""

COREFERENCE_EVALUATION_TEMPLATE = """# Reference Cohesion Translation Quality Evaluation
{role}
## Task Overview

You will receive an English source text that has been pre-annotated with pronoun information, along with a translation in a target language. Your job is to evaluate each annotated pronoun by determining:
1. How it was translated in the target language
2. Whether the translation is correct
3. If incorrect, what type of error occurred

## Evaluation Guidelines

For each annotated pronoun in the source text, you must add three new attributes to the existing annotation:

### Required Attributes to Add:
- **target_translation**: How the pronoun was rendered in the target language
- **is_correct**: Whether the translation is accurate (true/false)
- **error_type**: Type of error if translation is incorrect (null if correct)

### target_translation Values:
1. **Specific translation word(s)**: The actual translated pronoun (e.g., "Er", "elle")
2. **"omitted"**: The pronoun was appropriately omitted (common in pro-drop languages like Chinese/Japanese)
3. **"missing"**: The pronoun should have been translated but is absent

### is_correct Logic:
- If `target_translation` = specific word(s) -> `is_correct` can be true or false
- If `target_translation` = "omitted" -> `is_correct` must be true (appropriate omission)
- If `target_translation` = "missing" -> `is_correct` must be false (inappropriate absence)

### error_type Categories:
- **"null"**: No error (translation is correct)
- **"gender_mismatch"**: Wrong gender (he->she, him->her, etc.)
- **"wrong_referent"**: The translation points to a different entity
- **"missing_translation"**: The pronoun is absent from the translation

## Output Format

Return the complete annotated source text with the three new attributes added to each pronoun annotation:
```
[pronoun]<type="..." referent="..." target_translation="..." is_correct="true|false" error_type="...">
```

## Examples

### English Source Text
Tom and his sister went to the park. She found a ball and he picked it up. They decided to play together.
### German Translation
**Translation**: Tom und seine Schwester gingen in den Park. Er fand einen Ball und er hob ihn auf. waren glucklich zusammen zu spielen.

**Expected Output**:
```
Tom and [his]<type="possessive" referent="Tom" target_translation="seine" is_correct="true" error_type="null"> sister went to the park. [She]<type="personal" referent="his sister" target_translation="Er" is_correct="false" error_type="wrong_referent"> found a ball and [he]<type="personal" referent="Tom" target_translation="er" is_correct="true" error_type="null"> picked [it]<type="personal" referent="a ball" target_translation="ihn" is_correct="true" error_type="null"> up. [They]<type="personal" referent="Tom and his sister" target_translation="missing" is_correct="false" error_type="missing_translation"> decided to play together.
```

## Annotated Source
```
{annotated_source}
```

## Translation
```
{translation}
```

Return only the annotated source text with the added attributes."""

CONJUNCTION_EVALUATION_TEMPLATE = """# Conjunction Cohesion Translation Quality Evaluation
{role}
## Task Overview
You will receive an English source text that has been pre-annotated with conjunction information, along with a translation in a target language. Your job is to evaluate each annotated conjunction by determining:
1. How it was translated in the target language
2. Whether the translation preserves the correct logical relationship
3. If incorrect, what type of error occurred

## Evaluation Guidelines

For each annotated conjunction in the source text, you must add three new attributes to the existing annotation:

### Required Attributes to Add:
- **target_translation**: How the conjunction was rendered in the target language
- **is_correct**: Whether the translation preserves the logical relationship (true/false)
- **error_type**: Type of error if translation is incorrect (null if correct)

### target_translation Values:
1. **Specific translation word(s)**: The actual translated conjunction (e.g., "aber", "mais")
2. **"missing"**: The conjunction should have been translated but is absent

### is_correct Logic:
- If `target_translation` = specific word(s) -> `is_correct` can be true or false depending on logical relationship
- If `target_translation` = "missing" -> `is_correct` must be false (conjunction information lost)

### error_type Categories:
- **"null"**: No error (translation preserves correct logical relationship)
- **"wrong_conjunction"**: Conjunction translated but expresses wrong logical relationship
- **"missing_conjunction"**: Required conjunction is completely absent
- **"redundant_conjunction"**: Multiple conjunctions expressing same logical relationship
- **"inappropriate_addition"**: Adding conjunctions that create wrong logical relationships
- **"wrong_position"**: Conjunction in wrong syntactic position affecting meaning

## Output Format
Return the complete annotated source text with the three new attributes added to each conjunction annotation:
```
[conjunction]<type="..." relationship="..." target_translation="..." is_correct="true|false" error_type="...">
```

## Examples

### German Translation

**Target Translation**: Das Wetter war schlecht, so entschieden wir uns zu wandern. Zuerst packten wir unsere Taschen. Dann verlieben wir fruh, weil wir den Verkehr vermeiden wollten. Obwohl es zu regnen begann, obwohl wir unsere Reise fortsetzten.

**Expected Output**:
```
The weather was bad, [but]<type="coordinating" relationship="contrast" target_translation="so" is_correct="false" error_type="wrong_conjunction"> we decided to go hiking. [First]<type="conjunctive_adverb" relationship="sequence" target_translation="Zuerst" is_correct="true" error_type="null">, we packed our bags. [Then]<type="conjunctive_adverb" relationship="sequence" target_translation="Dann" is_correct="true" error_type="null"> we left early [because]<type="subordinating" relationship="cause" target_translation="weil" is_correct="true" error_type="null"> we wanted to avoid traffic. [Although]<type="subordinating" relationship="concession" target_translation="Obwohl, obwohl" is_correct="false" error_type="redundant_conjunction"> it started raining, we continued our journey.
```

## Annotated Source
```
{annotated_source}
```

## Translation
```
{translation}
```

Return only the annotated source text with the added attributes."""

ANNOTATION_TEMPLATES: Mapping[str, str] = {
    "coreference": COREFERENCE_ANNOTATION_TEMPLATE,
    "conjunction": CONJUNCTION_ANNOTATION_TEMPLATE,
}
EVALUATION_TEMPLATES: Mapping[str, str] = {
    "coreference": COREFERENCE_EVALUATION_TEMPLATE,
    "conjunction": CONJUNCTION_EVALUATION_TEMPLATE,
}


def fenced_block_after(prompt: str, heading: str) -> Optional[str]:
    """Body of the first ``` fence following ``heading`` (used by mocks)."""
    idx = prompt.rfind(heading)
    if idx < 0:
        return None
    m = re.compile(r"```\n(.*?)\n```", re.DOTALL).search(prompt, idx)
    return m.group(1) if m else None
