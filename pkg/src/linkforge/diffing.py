"""Added-link diffing, revision localization and scenario classification.

The five-way classification works on the sentence level: the link's section
is segmented in both versions, sentences are aligned by exact text equality,
and the unmatched structure around the newly linked sentence decides the
scenario. Sections absent from the before version short-circuit to
``missing_section``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from difflib import SequenceMatcher

from .errors import DataError, ParseError
from .ingest import (
    RawArticle,
    extract_links,
    load_raw_article,
    parse_article,
    target_qids_present,
)
from .records import (
    ArticleRecord,
    InsertionEvent,
    InsertionScenario,
    LinkRecord,
)
from .textnorm import jaccard, tokenize

MENTION_JACCARD_THRESHOLD = 0.5
MENTION_ADJACENT_TOKENS = 3

_VERSION_RE = re.compile(r"^---VERSION (\S+) (\S+)---$")


@dataclass(frozen=True)
class RevisionHistory:
    article_id: str
    versions: tuple[tuple[str, str, RawArticle], ...]  # (version_id, timestamp, raw)

    def __post_init__(self):
        object.__setattr__(self, "versions", tuple(self.versions))
        if not self.versions:
            raise DataError("revision history has no versions")
        stamps = [ts for _, ts, _ in self.versions]
        if stamps != sorted(stamps):
            raise DataError("revision timestamps decrease")


def diff_links(links_a, links_b) -> list[tuple[str, str]]:
    """Pairs (src_qid, tgt_qid) present in snapshot B but not in A, sorted."""
    pairs_a = {link.pair for link in links_a}
    pairs_b = {link.pair for link in links_b}
    return sorted(pairs_b - pairs_a)


def load_history(path, article_id: str = "") -> RevisionHistory:
    """Parse a revision-history file: markup blocks separated by version markers."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    versions = []
    current: list[str] = []
    header: tuple[str, str] | None = None
    for line in text.splitlines():
        match = _VERSION_RE.match(line)
        if match:
            if header is not None:
                versions.append((header, "\n".join(current)))
            header = (match.group(1), match.group(2))
            current = []
        elif header is not None:
            current.append(line)
        elif line.strip():
            raise ParseError(f"content before first version marker in {path}")
    if header is not None:
        versions.append((header, "\n".join(current)))
    if not versions:
        raise ParseError(f"no version markers in {path}")
    raws = tuple(
        (vid, ts, load_raw_article(markup, snapshot=vid)) for (vid, ts), markup in versions
    )
    return RevisionHistory(article_id=article_id or raws[0][2].qid, versions=raws)


def locate_insertion(history: RevisionHistory, pair: tuple[str, str]) -> tuple[str, str]:
    """Earliest consecutive version pair where the link appears (0 -> >=1)."""
    src, tgt = pair
    present = [
        raw.qid == src and tgt in target_qids_present(raw.markup)
        for _, _, raw in history.versions
    ]
    for i in range(len(present) - 1):
        if not present[i] and present[i + 1]:
            return history.versions[i][0], history.versions[i + 1][0]
    raise DataError(f"not localizable: link {pair} has no 0->1 transition in the history")


def _links_for_pair(record, raw, index, tgt) -> list[LinkRecord]:
    return [l for l in extract_links(record, raw, index) if l.tgt_qid == tgt]


def classify_insertion(
    before: ArticleRecord,
    after: ArticleRecord,
    link: LinkRecord,
    *,
    jaccard_threshold: float = MENTION_JACCARD_THRESHOLD,
    adjacent_tokens: int = MENTION_ADJACENT_TOKENS,
) -> InsertionEvent:
    """Assign one of the five insertion scenarios to an added link."""
    after_section = after.section_by_title(link.section_title)
    if after_section is None:
        raise DataError(f"section not found: {link.section_title!r} absent from after version")

    before_section = before.section_by_title(link.section_title)
    if before_section is None:
        return _event(link, before, after, InsertionScenario.MISSING_SECTION, 0)

    after_texts = [s.text for s in after_section.sentences]
    before_texts = [s.text for s in before_section.sentences]
    star = _find_link_sentence(after_texts, link)
    if star is None:
        raise DataError("link sentence not found in after version section")

    matched = _align(before_texts, after_texts)
    if star in matched:
        return _event(link, before, after, InsertionScenario.TEXT_PRESENT, matched[star])

    unmatched_before = [i for i in range(len(before_texts)) if i not in matched.values()]
    anchor = _best_mention_removal_match(
        after_texts[star], link.mention, before_texts, unmatched_before,
        jaccard_threshold, adjacent_tokens,
    )
    if anchor is not None:
        return _event(link, before, after, InsertionScenario.MISSING_MENTION, anchor)

    run_start = star
    while run_start > 0 and (run_start - 1) not in matched:
        run_start -= 1
    run_end = star
    while run_end + 1 < len(after_texts) and (run_end + 1) not in matched:
        run_end += 1
    scenario = (
        InsertionScenario.MISSING_SENTENCE
        if run_end == run_start
        else InsertionScenario.MISSING_SPAN
    )
    anchor = 0 if run_start == 0 else matched[run_start - 1]
    return _event(link, before, after, scenario, anchor)


def _event(link, before, after, scenario, anchor) -> InsertionEvent:
    return InsertionEvent(
        link=link,
        scenario=scenario,
        before_version_id=before.snapshot,
        after_version_id=after.snapshot,
        insertion_section=link.section_title,
        insertion_anchor=anchor,
    )


def _find_link_sentence(after_texts: list[str], link: LinkRecord) -> int | None:
    target = link.sentence_text
    for i, text in enumerate(after_texts):
        if text == target:
            return i
    for i, text in enumerate(after_texts):
        if link.mention in text:
            return i
    return None


def _align(before_texts: list[str], after_texts: list[str]) -> dict[int, int]:
    """after index -> before index for sentences equal in both versions."""
    matcher = SequenceMatcher(None, before_texts, after_texts, autojunk=False)
    matched = {}
    for block in matcher.get_matching_blocks():
        for offset in range(block.size):
            matched[block.b + offset] = block.a + offset
    return matched


def _best_mention_removal_match(
    sentence: str,
    mention: str,
    before_texts: list[str],
    unmatched_before: list[int],
    threshold: float,
    adjacent: int,
) -> int | None:
    """Before-sentence index whose tokens best match the link sentence with the
    mention (and up to `adjacent` tokens each side) deleted; None if no
    unmatched before-sentence reaches the threshold."""
    if not unmatched_before:
        return None
    variants = _mention_removal_variants(sentence, mention, adjacent)
    best_index = None
    best_score = threshold
    for b in unmatched_before:
        b_tokens = tokenize(before_texts[b])
        for variant in variants:
            score = jaccard(variant, b_tokens)
            if score > best_score or (score == best_score and best_index is None):
                best_index = b
                best_score = score
    return best_index


def _mention_removal_variants(sentence: str, mention: str, adjacent: int) -> list[list[str]]:
    tokens = tokenize(sentence)
    m_tokens = tokenize(mention)
    pos = _sublist_index(tokens, m_tokens) if m_tokens else None
    if pos is None:
        stripped = sentence.replace(mention, " ", 1)
        return [tokenize(stripped)]
    variants = []
    for left in range(adjacent + 1):
        for right in range(adjacent + 1):
            lo = max(0, pos - left)
            hi = min(len(tokens), pos + len(m_tokens) + right)
            variants.append(tokens[:lo] + tokens[hi:])
    return variants


def _sublist_index(haystack: list[str], needle: list[str]) -> int | None:
    if not needle or len(needle) > len(haystack):
        return None
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i : i + len(needle)] == needle:
            return i
    return None


@dataclass
class DiffCounts:
    added_pairs: int = 0
    events: int = 0
    not_localizable: int = 0
    missing_history: int = 0


def build_added_link_events(
    links_a: list[LinkRecord],
    links_b: list[LinkRecord],
    histories_dir,
) -> tuple[list[InsertionEvent], DiffCounts]:
    """Diff two snapshots and classify every localizable added link.

    History files are looked up as ``<src_qid>.history`` in `histories_dir`.
    Events come out ordered by (before article_id, src_qid, tgt_qid).
    """
    from pathlib import Path

    histories_dir = Path(histories_dir)
    counts = DiffCounts()
    pairs = diff_links(links_a, links_b)
    counts.added_pairs = len(pairs)
    by_pair_b: dict[tuple[str, str], LinkRecord] = {}
    for link in links_b:
        by_pair_b.setdefault(link.pair, link)
    history_cache: dict[str, RevisionHistory] = {}
    events = []
    for pair in pairs:
        src, tgt = pair
        if src not in history_cache:
            path = histories_dir / f"{src}.history"
            if not path.exists():
                counts.missing_history += 1
                history_cache[src] = None  # type: ignore[assignment]
                continue
            history_cache[src] = load_history(path)
        history = history_cache[src]
        if history is None:
            counts.missing_history += 1
            continue
        try:
            before_vid, after_vid = locate_insertion(history, pair)
        except DataError:
            counts.not_localizable += 1
            continue
        versions = {vid: raw for vid, _, raw in history.versions}
        before = parse_article(versions[before_vid])
        after = parse_article(versions[after_vid])
        snapshot_link = by_pair_b[pair]
        index = {tgt: (snapshot_link.tgt_title, snapshot_link.tgt_lead)}
        occurrences = _links_for_pair(after, versions[after_vid], index, tgt)
        if not occurrences:
            counts.not_localizable += 1
            continue
        link = occurrences[0]  # first occurrence in document order
        events.append((before.article_id, pair, classify_insertion(before, after, link)))
        counts.events += 1
    events.sort(key=lambda item: (item[0], item[1]))
    return [event for _, _, event in events], counts
