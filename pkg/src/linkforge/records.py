"""Domain records and their newline-delimited serialization.

Every pipeline stage exchanges these types. Records are immutable after
construction; invariants are enforced in ``__post_init__`` so that an invalid
record is never observable downstream. Files are UTF-8 ndjson with a one-line
header ``{"kind": <tag>, "schema": "linkforge/v1"}`` followed by one record
per line.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from .errors import InvariantError, ParseError
from .textnorm import contains_any_mention

SCHEMA = "linkforge/v1"

FILE_EXTENSIONS = {
    "article": ".articles.ndjson",
    "link": ".links.ndjson",
    "event": ".events.ndjson",
    "example": ".examples.ndjson",
}


class InsertionScenario(str, Enum):
    """How much new text accompanied a link addition."""

    TEXT_PRESENT = "text_present"
    MISSING_MENTION = "missing_mention"
    MISSING_SENTENCE = "missing_sentence"
    MISSING_SPAN = "missing_span"
    MISSING_SECTION = "missing_section"


#: Scenarios pooled into the "Missing" evaluation bucket.
MISSING_SCENARIOS = frozenset(
    {
        InsertionScenario.MISSING_MENTION,
        InsertionScenario.MISSING_SENTENCE,
        InsertionScenario.MISSING_SPAN,
    }
)


@dataclass(frozen=True)
class Sentence:
    text: str
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise InvariantError(f"sentence offsets out of order: ({self.start}, {self.end})")


@dataclass(frozen=True)
class Section:
    title: str
    text: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        prev_end = 0
        for sent in self.sentences:
            if sent.start < prev_end:
                raise InvariantError(
                    f"sentence offsets overlap or decrease at {sent.start} (previous end {prev_end})"
                )
            if sent.end > len(self.text):
                raise InvariantError(f"sentence end {sent.end} past section text length {len(self.text)}")
            if self.text[sent.start : sent.end] != sent.text:
                raise InvariantError(f"sentence text does not match section slice at {sent.start}")
            prev_end = sent.end


@dataclass(frozen=True)
class ArticleRecord:
    """One article version. May be constructed inadmissible (empty lead/qid)
    so ingest can count rejections; serialization refuses such records."""

    article_id: str
    title: str
    qid: str
    lang: str
    lead: str
    sections: tuple[Section, ...]
    snapshot: str

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))

    def admission_error(self) -> str | None:
        """Why this record would be rejected from a corpus, or None."""
        if not self.lead.strip():
            return "no lead"
        if not self.qid:
            return "missing qid"
        return None

    def section_by_title(self, title: str) -> Section | None:
        for section in self.sections:
            if section.title == title:
                return section
        return None

    @property
    def sentence_count(self) -> int:
        return sum(len(s.sentences) for s in self.sections)


@dataclass(frozen=True)
class LinkRecord:
    src_qid: str
    tgt_qid: str
    src_title: str
    tgt_title: str
    tgt_lead: str
    section_title: str
    context: str
    mention: str
    mention_start: int
    mention_end: int
    sentence_start: int
    sentence_end: int
    lang: str

    def __post_init__(self):
        if self.src_qid == self.tgt_qid:
            raise InvariantError(f"self-link: src_qid == tgt_qid == {self.src_qid!r}")
        if not (self.sentence_start <= self.mention_start < self.mention_end <= self.sentence_end):
            raise InvariantError(
                "offsets out of order: require sentence_start <= mention_start < mention_end"
                f" <= sentence_end, got ({self.sentence_start}, {self.mention_start},"
                f" {self.mention_end}, {self.sentence_end})"
            )
        if self.sentence_end > len(self.context) or self.sentence_start < 0:
            raise InvariantError("sentence offsets outside context")
        if self.context[self.mention_start : self.mention_end] != self.mention:
            raise InvariantError("mention offsets do not slice the mention out of context")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.src_qid, self.tgt_qid)

    @property
    def sentence_text(self) -> str:
        return self.context[self.sentence_start : self.sentence_end]


@dataclass(frozen=True)
class InsertionEvent:
    """An added link localized to a revision and classified into a scenario.

    The before/after containment invariant (before lacks the pair, after has
    it) is established by the diff stage and cannot be re-checked from the
    record alone.
    """

    link: LinkRecord
    scenario: InsertionScenario
    before_version_id: str
    after_version_id: str
    insertion_section: str
    insertion_anchor: int

    def __post_init__(self):
        if self.insertion_anchor < 0:
            raise InvariantError(f"insertion_anchor negative: {self.insertion_anchor}")


@dataclass(frozen=True)
class CandidateSpan:
    article_id: str
    section_title: str
    anchor_index: int
    window: int
    text: str
    is_gold: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise InvariantError("empty span")
        if self.anchor_index < 0 or self.window < 0:
            raise InvariantError("negative anchor_index or window")


@dataclass(frozen=True)
class TargetEntity:
    title: str
    lead: str
    mentions: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(self.mentions))


@dataclass(frozen=True)
class GoldProvenance:
    """Positional info of the original link inside the gold candidate text;
    carried only by examples built from existing links (augmentable)."""

    mention: str
    mention_start: int
    mention_end: int
    sentence_start: int
    sentence_end: int

    def __post_init__(self):
        if not (self.sentence_start <= self.mention_start < self.mention_end <= self.sentence_end):
            raise InvariantError("provenance offsets out of order")


@dataclass(frozen=True)
class RankingExample:
    example_id: str
    target: TargetEntity
    candidates: tuple[CandidateSpan, ...]
    gold_index: int
    scenario: InsertionScenario
    lang: str
    gold_provenance: GoldProvenance | None = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        golds = [i for i, c in enumerate(self.candidates) if c.is_gold]
        if len(golds) != 1:
            raise InvariantError(f"expected exactly one gold candidate, found {len(golds)}")
        if golds[0] != self.gold_index:
            raise InvariantError(
                f"gold_index {self.gold_index} does not point at the gold candidate (at {golds[0]})"
            )
        for i, cand in enumerate(self.candidates):
            if not cand.is_gold and contains_any_mention(cand.text, self.target.mentions):
                raise InvariantError(f"non-gold candidate {i} contains a target mention")
        if self.gold_provenance is not None:
            prov = self.gold_provenance
            gold_text = self.candidates[self.gold_index].text
            if prov.sentence_end > len(gold_text):
                raise InvariantError("provenance offsets outside gold text")
            if gold_text[prov.mention_start : prov.mention_end] != prov.mention:
                raise InvariantError("provenance mention offsets do not slice the mention")

    @property
    def gold(self) -> CandidateSpan:
        return self.candidates[self.gold_index]


@dataclass(frozen=True)
class AugmentedExample:
    """A base example plus one applied context-removal; the rewritten gold
    text is derived, the base is kept verbatim."""

    base: RankingExample
    applied_strategy: str
    removed_range: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "removed_range", tuple(self.removed_range))
        start, end = self.removed_range
        gold_text = self.base.gold.text
        if not (0 <= start <= end <= len(gold_text)):
            raise InvariantError(f"removed_range {self.removed_range} outside gold text")
        if not self.augmented_gold_text.strip():
            raise InvariantError("gold text empty after removal")

    @property
    def augmented_gold_text(self) -> str:
        start, end = self.removed_range
        text = self.base.gold.text
        return text[:start] + text[end:]


@dataclass(frozen=True)
class Ranking:
    example_id: str
    scores: tuple[float, ...]
    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        if len(self.scores) != len(self.order):
            raise InvariantError("order and scores lengths differ")
        if not self.scores:
            raise InvariantError("empty ranking")
        for s in self.scores:
            if not math.isfinite(s):
                raise InvariantError(f"non-finite score {s!r}")
        if list(self.order) != _stable_order(self.scores):
            raise InvariantError("order is not the stable descending sort of scores")

    @classmethod
    def from_scores(cls, example_id: str, scores: Iterable[float]) -> "Ranking":
        scores = tuple(float(s) for s in scores)
        return cls(example_id=example_id, scores=scores, order=tuple(_stable_order(scores)))

    def rank_of(self, candidate_index: int) -> int:
        """1-based rank of a candidate index."""
        return self.order.index(candidate_index) + 1


def _stable_order(scores) -> list[int]:
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


# --- serialization ----------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _article_to_obj(rec: ArticleRecord):
    return {
        "article_id": rec.article_id,
        "title": rec.title,
        "qid": rec.qid,
        "lang": rec.lang,
        "lead": rec.lead,
        "snapshot": rec.snapshot,
        "sections": [
            {"title": s.title, "text": s.text, "spans": [[x.start, x.end] for x in s.sentences]}
            for s in rec.sections
        ],
    }


def _article_from_obj(obj) -> ArticleRecord:
    sections = tuple(
        Section(
            title=s["title"],
            text=s["text"],
            sentences=tuple(Sentence(s["text"][a:b], a, b) for a, b in s["spans"]),
        )
        for s in obj["sections"]
    )
    return ArticleRecord(
        article_id=obj["article_id"],
        title=obj["title"],
        qid=obj["qid"],
        lang=obj["lang"],
        lead=obj["lead"],
        sections=sections,
        snapshot=obj["snapshot"],
    )


_LINK_FIELDS = (
    "src_qid", "tgt_qid", "src_title", "tgt_title", "tgt_lead", "section_title",
    "context", "mention", "mention_start", "mention_end", "sentence_start",
    "sentence_end", "lang",
)


def _link_to_obj(rec: LinkRecord):
    return {name: getattr(rec, name) for name in _LINK_FIELDS}


def _link_from_obj(obj) -> LinkRecord:
    return LinkRecord(**{name: obj[name] for name in _LINK_FIELDS})


def _event_to_obj(rec: InsertionEvent):
    return {
        "link": _link_to_obj(rec.link),
        "scenario": rec.scenario.value,
        "before_version_id": rec.before_version_id,
        "after_version_id": rec.after_version_id,
        "insertion_section": rec.insertion_section,
        "insertion_anchor": rec.insertion_anchor,
    }


def _event_from_obj(obj) -> InsertionEvent:
    return InsertionEvent(
        link=_link_from_obj(obj["link"]),
        scenario=InsertionScenario(obj["scenario"]),
        before_version_id=obj["before_version_id"],
        after_version_id=obj["after_version_id"],
        insertion_section=obj["insertion_section"],
        insertion_anchor=obj["insertion_anchor"],
    )


def _span_to_obj(c: CandidateSpan):
    return {
        "article_id": c.article_id,
        "section_title": c.section_title,
        "anchor_index": c.anchor_index,
        "window": c.window,
        "text": c.text,
        "is_gold": c.is_gold,
    }


def _span_from_obj(obj) -> CandidateSpan:
    return CandidateSpan(
        article_id=obj["article_id"],
        section_title=obj["section_title"],
        anchor_index=obj["anchor_index"],
        window=obj["window"],
        text=obj["text"],
        is_gold=obj["is_gold"],
    )


def _example_to_obj(rec: RankingExample):
    prov = rec.gold_provenance
    return {
        "example_id": rec.example_id,
        "target": {
            "title": rec.target.title,
            "lead": rec.target.lead,
            "mentions": list(rec.target.mentions),
        },
        "candidates": [_span_to_obj(c) for c in rec.candidates],
        "gold_index": rec.gold_index,
        "scenario": rec.scenario.value,
        "lang": rec.lang,
        "gold_provenance": None
        if prov is None
        else {
            "mention": prov.mention,
            "mention_start": prov.mention_start,
            "mention_end": prov.mention_end,
            "sentence_start": prov.sentence_start,
            "sentence_end": prov.sentence_end,
        },
    }


def _example_from_obj(obj) -> RankingExample:
    prov = obj.get("gold_provenance")
    return RankingExample(
        example_id=obj["example_id"],
        target=TargetEntity(
            title=obj["target"]["title"],
            lead=obj["target"]["lead"],
            mentions=tuple(obj["target"]["mentions"]),
        ),
        candidates=tuple(_span_from_obj(c) for c in obj["candidates"]),
        gold_index=obj["gold_index"],
        scenario=InsertionScenario(obj["scenario"]),
        lang=obj["lang"],
        gold_provenance=None if prov is None else GoldProvenance(**prov),
    )


def _augmented_to_obj(rec: AugmentedExample):
    return {
        "base": _example_to_obj(rec.base),
        "applied_strategy": rec.applied_strategy,
        "removed_range": list(rec.removed_range),
    }


def _augmented_from_obj(obj) -> AugmentedExample:
    return AugmentedExample(
        base=_example_from_obj(obj["base"]),
        applied_strategy=obj["applied_strategy"],
        removed_range=tuple(obj["removed_range"]),
    )


def _ranking_to_obj(rec: Ranking):
    return {"example_id": rec.example_id, "scores": list(rec.scores), "order": list(rec.order)}


def _ranking_from_obj(obj) -> Ranking:
    return Ranking(example_id=obj["example_id"], scores=tuple(obj["scores"]), order=tuple(obj["order"]))


_CODECS = {
    "article": (ArticleRecord, _article_to_obj, _article_from_obj),
    "link": (LinkRecord, _link_to_obj, _link_from_obj),
    "event": (InsertionEvent, _event_to_obj, _event_from_obj),
    "span": (CandidateSpan, _span_to_obj, _span_from_obj),
    "example": (RankingExample, _example_to_obj, _example_from_obj),
    "augmented": (AugmentedExample, _augmented_to_obj, _augmented_from_obj),
    "ranking": (Ranking, _ranking_to_obj, _ranking_from_obj),
}

_KIND_OF_TYPE = {cls: kind for kind, (cls, _, _) in _CODECS.items()}


def kind_of(record) -> str:
    try:
        return _KIND_OF_TYPE[type(record)]
    except KeyError:
        raise InvariantError(f"unknown record type {type(record).__name__}") from None


def serialize_record(record) -> str:
    """One newline-free UTF-8 line; raises InvariantError on invalid records."""
    kind = kind_of(record)
    if isinstance(record, ArticleRecord):
        reason = record.admission_error()
        if reason is not None:
            raise InvariantError(reason)
    _, to_obj, _ = _CODECS[kind]
    return _dumps(to_obj(record))


def deserialize_record(line: str, kind: str):
    """Parse and validate one record line; invalid records never escape."""
    if kind not in _CODECS:
        raise ParseError(f"unknown record kind {kind!r}")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        byte_offset = len(line[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed record line: {exc.msg}", offset=byte_offset) from None
    if not isinstance(obj, dict):
        raise ParseError("record line is not a JSON object", offset=0)
    _, _, from_obj = _CODECS[kind]
    try:
        record = from_obj(obj)
    except InvariantError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError, IndexError) as exc:
        raise ParseError(f"record does not conform to kind {kind!r}: {exc}") from None
    if isinstance(record, ArticleRecord):
        reason = record.admission_error()
        if reason is not None:
            raise InvariantError(reason)
    return record


def header_line(kind: str) -> str:
    return _dumps({"kind": kind, "schema": SCHEMA})


def parse_header(line: str, path=None) -> str:
    """Validate a file header and return its kind tag."""
    where = f" in {path}" if path else ""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise ParseError(f"missing or malformed header line{where}") from None
    if not isinstance(obj, dict) or obj.get("schema") != SCHEMA or "kind" not in obj:
        raise ParseError(f"unrecognized header{where}: expected schema {SCHEMA!r}")
    return obj["kind"]


def write_records(path, kind: str, records: Iterable) -> int:
    """Write a header plus one line per record; returns the record count."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header_line(kind) + "\n")
        for record in records:
            actual = kind_of(record)
            if actual != kind:
                raise InvariantError(f"record of kind {actual!r} in file of kind {kind!r}")
            fh.write(serialize_record(record) + "\n")
            count += 1
    return count


def read_records(path, kind: str | None = None) -> Iterator:
    """Yield validated records; checks the header (and the expected kind)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise ParseError(f"empty file: {path}")
        actual_kind = parse_header(header, path=path)
        if kind is not None and actual_kind != kind:
            raise ParseError(f"expected kind {kind!r} but {path} holds {actual_kind!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                yield deserialize_record(line, actual_kind)
            except (ParseError, InvariantError) as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from None


def file_kind(path) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_header(fh.readline(), path=path)
