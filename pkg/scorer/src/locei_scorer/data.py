"""Reading ranking examples from linkforge/v1 ndjson files.

This package deliberately does not import the corpus engine; the ndjson file
schema and the stdio scorer protocol are the only couplings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

SCHEMA = "linkforge/v1"
MAX_MENTIONS = 10

MISSING_SCENARIOS = {"missing_mention", "missing_sentence", "missing_span"}


@dataclass(frozen=True)
class Candidate:
    section_title: str
    text: str
    is_gold: bool = False


@dataclass(frozen=True)
class Provenance:
    mention: str
    mention_start: int
    mention_end: int
    sentence_start: int
    sentence_end: int


@dataclass(frozen=True)
class Example:
    example_id: str
    target_title: str
    target_lead: str
    mentions: tuple[str, ...]
    candidates: tuple[Candidate, ...]
    gold_index: int
    scenario: str
    lang: str
    provenance: Provenance | None = None


def truncate_mentions(mentions, limit: int = MAX_MENTIONS) -> tuple[str, ...]:
    """Deduplicate preserving order and cap at the mention budget."""
    seen, out = set(), []
    for m in mentions:
        if m and m not in seen:
            seen.add(m)
            out.append(m)
        if len(out) == limit:
            break
    return tuple(out)


def example_from_obj(obj: dict) -> Example:
    prov = obj.get("gold_provenance")
    return Example(
        example_id=obj["example_id"],
        target_title=obj["target"]["title"],
        target_lead=obj["target"]["lead"],
        mentions=truncate_mentions(obj["target"]["mentions"]),
        candidates=tuple(
            Candidate(c["section_title"], c["text"], c["is_gold"]) for c in obj["candidates"]
        ),
        gold_index=obj["gold_index"],
        scenario=obj["scenario"],
        lang=obj["lang"],
        provenance=None if prov is None else Provenance(**prov),
    )


def read_examples(path) -> list[Example]:
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("schema") != SCHEMA or header.get("kind") != "example":
            raise ValueError(f"{path} is not a {SCHEMA} example file")
        for line in fh:
            line = line.strip()
            if line:
                examples.append(example_from_obj(json.loads(line)))
    return examples
