"""Candidate span partitioning and ranking-example assembly.

Training examples carry one gold plus N sampled negatives (hard negatives
from the source article first, easy negatives from a cross-article pool when
the article is too small). Evaluation examples keep every eligible span of
the article. Two rules gate eligibility everywhere: a span never crosses a
section boundary, and no negative may contain a previously used mention of
the target entity.
"""
from __future__ import annotations

import hashlib
import random
from collections import Counter
from dataclasses import dataclass

from .errors import DataError, InsufficientNegativesError
from .records import (
    ArticleRecord,
    CandidateSpan,
    GoldProvenance,
    InsertionEvent,
    InsertionScenario,
    LinkRecord,
    RankingExample,
    TargetEntity,
)
from .textnorm import contains_any_mention, stable_hash64

DEFAULT_WINDOW = 5
DEFAULT_NEGATIVES = 9


def partition_spans(article: ArticleRecord, window: int = DEFAULT_WINDOW) -> list[CandidateSpan]:
    """One span per sentence: anchor +- `window` sentences, section-bounded."""
    if window < 0:
        raise DataError(f"window must be >= 0, got {window}")
    spans = []
    for section in article.sections:
        sentences = section.sentences
        for i in range(len(sentences)):
            lo = max(0, i - window)
            hi = min(len(sentences) - 1, i + window)
            text = section.text[sentences[lo].start : sentences[hi].end]
            spans.append(
                CandidateSpan(
                    article_id=article.article_id,
                    section_title=section.title,
                    anchor_index=i,
                    window=window,
                    text=text,
                )
            )
    return spans


def sample_negatives(
    spans: list[CandidateSpan],
    gold: CandidateSpan,
    target_mentions,
    n: int,
    pool: list[CandidateSpan],
    rng: random.Random,
) -> list[CandidateSpan]:
    """Sample `n` negatives: hard (same article) first, topped up from `pool`.

    Spans overlapping the gold anchor sentence and spans containing any
    target mention are never eligible.
    """
    if n < 1:
        raise DataError(f"negative count must be >= 1, got {n}")
    hard_eligible = [
        span
        for span in spans
        if not span.is_gold
        and not _covers_gold_anchor(span, gold)
        and not contains_any_mention(span.text, target_mentions)
    ]
    negatives = (
        rng.sample(hard_eligible, n)
        if len(hard_eligible) > n
        else list(hard_eligible)
    )
    if len(negatives) < n:
        easy_eligible = [
            span
            for span in pool
            if span.article_id != gold.article_id
            and not contains_any_mention(span.text, target_mentions)
        ]
        shortfall = n - len(negatives)
        if len(easy_eligible) < shortfall:
            raise InsufficientNegativesError(n, len(negatives) + len(easy_eligible))
        negatives.extend(rng.sample(easy_eligible, shortfall))
    return negatives


def _covers_gold_anchor(span: CandidateSpan, gold: CandidateSpan) -> bool:
    if span.article_id != gold.article_id or span.section_title != gold.section_title:
        return False
    return abs(span.anchor_index - gold.anchor_index) <= span.window


def example_rng(global_seed: int, example_id: str) -> random.Random:
    """Per-example generator: reproducible regardless of processing order."""
    return random.Random(global_seed ^ stable_hash64(example_id))


def event_example_id(event: InsertionEvent) -> str:
    key = "\x1f".join(
        (
            event.link.src_qid,
            event.link.tgt_qid,
            event.before_version_id,
            event.after_version_id,
            event.scenario.value,
        )
    )
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def link_example_id(link: LinkRecord) -> str:
    key = "\x1f".join(
        (link.src_qid, link.tgt_qid, link.section_title, link.mention, str(link.mention_start))
    )
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def build_example(
    event: InsertionEvent,
    before: ArticleRecord,
    target_meta: TargetEntity,
    negatives: int | None,
    rng: random.Random,
    *,
    pool: list[CandidateSpan] | None = None,
    window: int = DEFAULT_WINDOW,
) -> RankingExample:
    """Assemble the ranking example for one insertion event.

    `negatives=None` selects evaluation mode (all eligible spans of the
    article, document order); an integer selects training mode (gold + N
    sampled negatives, shuffled). missing_section events are not rankable
    and must be routed to a side channel by the caller.
    """
    if event.scenario is InsertionScenario.MISSING_SECTION:
        raise DataError("missing_section events are not rankable")
    section = before.section_by_title(event.insertion_section)
    if section is None:
        raise DataError(f"gold unresolvable: section {event.insertion_section!r} not in before version")
    anchor = _resolve_gold_anchor(event, section)
    if anchor is None:
        raise DataError("gold unresolvable: anchor sentence not found in before version")
    return _assemble(
        example_id=event_example_id(event),
        article=before,
        section_title=section.title,
        anchor=anchor,
        target=target_meta,
        scenario=event.scenario,
        negatives=negatives,
        rng=rng,
        pool=pool,
        window=window,
        provenance=None,
    )


def _resolve_gold_anchor(event: InsertionEvent, section) -> int | None:
    sentences = section.sentences
    if not sentences:
        return None
    if event.scenario is InsertionScenario.TEXT_PRESENT:
        # The mention exists verbatim in the before version; prefer the
        # classifier's anchor, fall back to a scan.
        idx = event.insertion_anchor
        if idx < len(sentences) and event.link.mention in sentences[idx].text:
            return idx
        for i, sent in enumerate(sentences):
            if event.link.mention in sent.text:
                return i
        return None
    return min(event.insertion_anchor, len(sentences) - 1)


def build_existing_example(
    link: LinkRecord,
    article: ArticleRecord,
    target_mentions,
    negatives: int | None,
    rng: random.Random,
    *,
    pool: list[CandidateSpan] | None = None,
    window: int = DEFAULT_WINDOW,
) -> RankingExample:
    """Ranking example for an existing link (stage-1 training data).

    The gold candidate carries the link's positional info so dynamic context
    removal can be applied later.
    """
    section = article.section_by_title(link.section_title)
    if section is None:
        raise DataError(f"gold unresolvable: section {link.section_title!r} not in article")
    located = _locate_link_sentence(link, section)
    if located is None:
        raise DataError("gold unresolvable: link sentence not found in article")
    anchor, mention_abs = located

    sentences = section.sentences
    mention_end_abs = mention_abs + len(link.mention)
    run_end_idx = anchor
    while run_end_idx + 1 < len(sentences) and sentences[run_end_idx].end < mention_end_abs:
        run_end_idx += 1
    lo = max(0, anchor - window)
    hi = min(len(sentences) - 1, anchor + window)
    if run_end_idx > hi:
        raise DataError("gold unresolvable: mention extends past the candidate window")
    base = sentences[lo].start
    provenance = GoldProvenance(
        mention=link.mention,
        mention_start=mention_abs - base,
        mention_end=mention_end_abs - base,
        sentence_start=sentences[anchor].start - base,
        sentence_end=sentences[run_end_idx].end - base,
    )
    target = TargetEntity(title=link.tgt_title, lead=link.tgt_lead, mentions=tuple(target_mentions))
    return _assemble(
        example_id=link_example_id(link),
        article=article,
        section_title=section.title,
        anchor=anchor,
        target=target,
        scenario=InsertionScenario.TEXT_PRESENT,
        negatives=negatives,
        rng=rng,
        pool=pool,
        window=window,
        provenance=provenance,
    )


def _locate_link_sentence(link: LinkRecord, section) -> tuple[int, int] | None:
    """(sentence index, absolute mention offset) of the link inside its section."""
    offset_in_sentence = link.mention_start - link.sentence_start
    for i, sent in enumerate(section.sentences):
        if sent.text == link.sentence_text:
            mention_abs = sent.start + offset_in_sentence
            if section.text[mention_abs : mention_abs + len(link.mention)] == link.mention:
                return i, mention_abs
    position = section.text.find(link.mention)
    if position == -1:
        return None
    for i, sent in enumerate(section.sentences):
        if sent.start <= position < sent.end:
            return i, position
    return None


def _assemble(
    *,
    example_id: str,
    article: ArticleRecord,
    section_title: str,
    anchor: int,
    target: TargetEntity,
    scenario: InsertionScenario,
    negatives: int | None,
    rng: random.Random,
    pool: list[CandidateSpan] | None,
    window: int,
    provenance: GoldProvenance | None,
) -> RankingExample:
    spans = partition_spans(article, window)
    gold = None
    for i, span in enumerate(spans):
        if span.section_title == section_title and span.anchor_index == anchor:
            gold = CandidateSpan(
                article_id=span.article_id,
                section_title=span.section_title,
                anchor_index=span.anchor_index,
                window=span.window,
                text=span.text,
                is_gold=True,
            )
            spans[i] = gold
            break
    if gold is None:
        raise DataError("gold unresolvable: anchor span missing from partition")

    if negatives is None:
        candidates = [
            span
            for span in spans
            if span.is_gold or not contains_any_mention(span.text, target.mentions)
        ]
        gold_index = candidates.index(gold)
    else:
        sampled = sample_negatives(spans, gold, target.mentions, negatives, pool or [], rng)
        candidates = [gold] + sampled
        rng.shuffle(candidates)
        gold_index = candidates.index(gold)
    return RankingExample(
        example_id=example_id,
        target=target,
        candidates=tuple(candidates),
        gold_index=gold_index,
        scenario=scenario,
        lang=article.lang,
        gold_provenance=provenance,
    )


def mention_inventory(links_or_events) -> dict[str, list[str]]:
    """Previously used mentions per target qid, most frequent first
    (alphabetical tie-break)."""
    counts: dict[str, Counter] = {}
    for item in links_or_events:
        link = item.link if isinstance(item, InsertionEvent) else item
        counts.setdefault(link.tgt_qid, Counter())[link.mention] += 1
    return {
        qid: [m for m, _ in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))]
        for qid, counter in counts.items()
    }


@dataclass
class CandidateCounts:
    examples: int = 0
    side_channel: int = 0
    gold_unresolvable: int = 0


def build_examples_from_events(
    events: list[InsertionEvent],
    articles: dict[str, ArticleRecord],
    *,
    mode: str,
    negatives: int = DEFAULT_NEGATIVES,
    window: int = DEFAULT_WINDOW,
    seed: int = 0,
    mention_sources: list[LinkRecord] | None = None,
) -> tuple[list[RankingExample], list[InsertionEvent], CandidateCounts]:
    """Drive build_example over an event stream.

    `articles` maps src_qid to the before-version ArticleRecord. The mention
    inventory pools the events with any `mention_sources` links (typically
    the existing links of the before snapshot). Returns the examples, the
    missing_section side channel, and counters.
    """
    if mode not in ("train", "eval"):
        raise DataError(f"mode must be 'train' or 'eval', got {mode!r}")
    counts = CandidateCounts()
    inventory = mention_inventory(list(events) + list(mention_sources or []))
    pool = None
    if mode == "train":
        pool = []
        for qid in sorted(articles):
            pool.extend(partition_spans(articles[qid], window))
    side_channel = []
    examples = []
    for event in events:
        if event.scenario is InsertionScenario.MISSING_SECTION:
            side_channel.append(event)
            counts.side_channel += 1
            continue
        article = articles.get(event.link.src_qid)
        if article is None:
            counts.gold_unresolvable += 1
            continue
        target = TargetEntity(
            title=event.link.tgt_title,
            lead=event.link.tgt_lead,
            mentions=tuple(inventory.get(event.link.tgt_qid, [])),
        )
        rng = example_rng(seed, event_example_id(event))
        try:
            example = build_example(
                event,
                article,
                target,
                negatives if mode == "train" else None,
                rng,
                pool=pool,
                window=window,
            )
        except DataError as exc:
            if "gold unresolvable" in str(exc):
                counts.gold_unresolvable += 1
                continue
            raise
        examples.append(example)
        counts.examples += 1
    return examples, side_channel, counts


def build_examples_from_links(
    links: list[LinkRecord],
    articles: dict[str, ArticleRecord],
    *,
    negatives: int = DEFAULT_NEGATIVES,
    window: int = DEFAULT_WINDOW,
    seed: int = 0,
) -> tuple[list[RankingExample], CandidateCounts]:
    """Stage-1 training examples (with positional provenance) from existing links."""
    counts = CandidateCounts()
    inventory = mention_inventory(links)
    pool = []
    for qid in sorted(articles):
        pool.extend(partition_spans(articles[qid], window))
    examples = []
    for link in links:
        article = articles.get(link.src_qid)
        if article is None:
            counts.gold_unresolvable += 1
            continue
        rng = example_rng(seed, link_example_id(link))
        try:
            example = build_existing_example(
                link,
                article,
                inventory.get(link.tgt_qid, []),
                negatives,
                rng,
                pool=pool,
                window=window,
            )
        except DataError as exc:
            if "gold unresolvable" in str(exc):
                counts.gold_unresolvable += 1
                continue
            raise
        examples.append(example)
        counts.examples += 1
    return examples, counts
