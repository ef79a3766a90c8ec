"""Article markup parsing and link extraction with positional context windows.

The input grammar is a restricted HTML subset, hand-authorable for fixtures:

    <article title="..." qid="Q..." lang="..">
      <section title="...">
        <p>text with <a href="qid:Q...">anchors</a> ...</p>
        <figure>ignored</figure> <table>ignored</table>
        <note>ignored</note> <caption>ignored</caption>
      </section>
    </article>

Content inside figure/table/note/caption is excluded from sections entirely.
Whitespace runs inside paragraphs collapse to a single space; paragraphs are
joined with a newline to form the section text, which the sentence segmenter
treats as a hard break.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

from .errors import DataError, ParseError
from .records import ArticleRecord, LinkRecord, Section, Sentence
from .segmentation import segment_sentences
from .textnorm import article_id_for

CONTEXT_HALF_WIDTH = 5  # sentences kept on each side of the anchor sentence

_IGNORED = {"figure", "table", "note", "caption"}
_KNOWN = {"article", "section", "p", "a"} | _IGNORED
_WS_SPLIT = re.compile(r"(\s+)")


@dataclass(frozen=True)
class RawArticle:
    markup: str
    title: str
    qid: str
    lang: str
    snapshot: str


@dataclass
class _Anchor:
    section_index: int
    start: int
    end: int
    target_qid: str
    text: str


@dataclass
class _ParsedMarkup:
    title: str = ""
    qid: str = ""
    lang: str = ""
    sections: list = field(default_factory=list)  # (title, text)
    anchors: list = field(default_factory=list)  # _Anchor, document order
    empty_anchors: int = 0


class _MarkupReader(HTMLParser):
    """Strict reader for the input grammar; unknown or misnested tags fail."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.out = _ParsedMarkup()
        self._stack: list[str] = []
        self._ignore_depth = 0
        self._section_title = None
        self._paragraphs: list[str] = []
        self._buf: list[str] = []
        self._buf_len = 0
        self._pending_space = False
        self._in_p = False
        self._anchor_start = None
        self._anchor_qid = None
        self._pending_anchors: list = []  # (start, end, qid) within current paragraph
        self._para_anchors: list = []  # per finished paragraph

    def _fail(self, message):
        line, col = self.getpos()
        raise ParseError(message, line=line, column=col)

    # -- text assembly with whitespace collapsing

    def _append_text(self, data: str) -> None:
        for piece in _WS_SPLIT.split(data):
            if not piece:
                continue
            if piece.isspace():
                if self._buf_len:
                    self._pending_space = True
            else:
                if self._pending_space:
                    self._buf.append(" ")
                    self._buf_len += 1
                    self._pending_space = False
                self._buf.append(piece)
                self._buf_len += len(piece)

    def handle_data(self, data):
        if self._ignore_depth:
            return
        if self._in_p:
            self._append_text(data)
        elif data.strip():
            self._fail("text outside <p>")

    # -- tag handling

    def handle_starttag(self, tag, attrs):
        if tag not in _KNOWN:
            self._fail(f"unknown element <{tag}>")
        attrs = dict(attrs)
        if tag in _IGNORED:
            self._ignore_depth += 1
            self._stack.append(tag)
            return
        if self._ignore_depth:
            self._stack.append(tag)
            return
        if tag == "article":
            if self._stack:
                self._fail("<article> must be the root element")
            self.out.title = attrs.get("title", "")
            self.out.qid = attrs.get("qid", "")
            self.out.lang = attrs.get("lang", "")
        elif tag == "section":
            if self._stack[-1:] != ["article"]:
                self._fail("<section> must be directly inside <article>")
            self._section_title = attrs.get("title", "")
            self._paragraphs = []
            self._para_anchors = []
        elif tag == "p":
            if self._stack[-1:] != ["section"]:
                self._fail("<p> must be directly inside <section>")
            self._buf = []
            self._buf_len = 0
            self._pending_space = False
            self._pending_anchors = []
            self._in_p = True
        elif tag == "a":
            if not self._in_p:
                self._fail("<a> outside <p>")
            if self._anchor_start is not None:
                self._fail("nested <a>")
            href = attrs.get("href", "")
            if not href.startswith("qid:") or len(href) <= 4:
                self._fail(f"anchor href must be 'qid:<id>', got {href!r}")
            if self._pending_space and self._buf_len:
                self._buf.append(" ")
                self._buf_len += 1
                self._pending_space = False
            self._anchor_start = self._buf_len
            self._anchor_qid = href[4:]
        self._stack.append(tag)

    def handle_endtag(self, tag):
        if tag not in _KNOWN:
            self._fail(f"unknown element </{tag}>")
        if not self._stack or self._stack[-1] != tag:
            self._fail(f"mismatched </{tag}>")
        self._stack.pop()
        if tag in _IGNORED:
            self._ignore_depth -= 1 if self._ignore_depth else 0
            return
        if self._ignore_depth:
            return
        if tag == "a":
            end = self._buf_len
            if end == self._anchor_start:
                self.out.empty_anchors += 1
            else:
                self._pending_anchors.append((self._anchor_start, end, self._anchor_qid))
            self._anchor_start = None
            self._anchor_qid = None
        elif tag == "p":
            self._paragraphs.append("".join(self._buf))
            self._para_anchors.append(self._pending_anchors)
            self._in_p = False
        elif tag == "section":
            section_index = len(self.out.sections)
            offset = 0
            parts = []
            for para, anchors in zip(self._paragraphs, self._para_anchors):
                for start, end, qid in anchors:
                    text = para[start:end]
                    self.out.anchors.append(
                        _Anchor(section_index, offset + start, offset + end, qid, text)
                    )
                parts.append(para)
                offset += len(para) + 1  # joined with "\n"
            self.out.sections.append((self._section_title, "\n".join(parts)))
            self._section_title = None

    def close(self):
        super().close()
        if self._stack:
            self._fail(f"unclosed element <{self._stack[-1]}>")
        return self.out


def _parse_markup(markup: str) -> _ParsedMarkup:
    reader = _MarkupReader()
    reader.feed(markup)
    return reader.close()


def load_raw_article(markup: str, snapshot: str, *, default_lang: str = "en") -> RawArticle:
    """Build a RawArticle from markup whose <article> tag carries metadata."""
    parsed = _parse_markup(markup)
    return RawArticle(
        markup=markup,
        title=parsed.title,
        qid=parsed.qid,
        lang=parsed.lang or default_lang,
        snapshot=snapshot,
    )


def _build_record(parsed: _ParsedMarkup, raw: RawArticle) -> ArticleRecord:
    sections = []
    for title, text in parsed.sections:
        sentences = tuple(
            Sentence(t, s, e) for t, s, e in segment_sentences(text, raw.lang)
        )
        sections.append(Section(title=title, text=text, sentences=sentences))
    lead = ""
    if sections:
        first_para = sections[0].text.split("\n", 1)[0]
        lead = first_para.strip()
    return ArticleRecord(
        article_id=article_id_for(raw.lang, raw.title, raw.snapshot),
        title=raw.title,
        qid=raw.qid,
        lang=raw.lang,
        lead=lead,
        sections=tuple(sections),
        snapshot=raw.snapshot,
    )


def parse_article(raw: RawArticle) -> ArticleRecord:
    """Parse markup into a sentence-segmented ArticleRecord.

    Records missing a lead or qid are returned (not raised) so callers can
    count rejections; they fail serialization.
    """
    return _build_record(_parse_markup(raw.markup), raw)


def extract_links(
    article: ArticleRecord,
    raw: RawArticle,
    target_index: dict[str, tuple[str, str]],
    *,
    context_width: int = CONTEXT_HALF_WIDTH,
) -> list[LinkRecord]:
    """One LinkRecord per main-body link whose target is in `target_index`.

    The context is the anchor's sentence plus up to `context_width` sentences
    on each side, clipped at the section boundary. Self-links, links to
    unknown targets and empty anchors produce no record.
    """
    return _build_links(_parse_markup(raw.markup), article, target_index, context_width)


def _build_links(
    parsed: _ParsedMarkup,
    article: ArticleRecord,
    target_index: dict[str, tuple[str, str]],
    context_width: int,
) -> list[LinkRecord]:
    links = []
    for anchor in parsed.anchors:
        if anchor.target_qid == article.qid:
            continue
        target = target_index.get(anchor.target_qid)
        if target is None:
            continue
        section = article.sections[anchor.section_index]
        sentences = section.sentences
        if not sentences:
            continue
        idx = _sentence_containing(sentences, anchor.start)
        if idx is None:
            continue
        last = _sentence_containing(sentences, max(anchor.start, anchor.end - 1))
        if last is None:
            last = idx
        lo = max(0, idx - context_width)
        hi = min(len(sentences) - 1, max(idx + context_width, last))
        base = sentences[lo].start
        context = section.text[base : sentences[hi].end]
        tgt_title, tgt_lead = target
        links.append(
            LinkRecord(
                src_qid=article.qid,
                tgt_qid=anchor.target_qid,
                src_title=article.title,
                tgt_title=tgt_title,
                tgt_lead=tgt_lead,
                section_title=section.title,
                context=context,
                mention=anchor.text,
                mention_start=anchor.start - base,
                mention_end=anchor.end - base,
                sentence_start=sentences[idx].start - base,
                sentence_end=sentences[last].end - base,
                lang=article.lang,
            )
        )
    return links


def _sentence_containing(sentences, position: int) -> int | None:
    for i, sent in enumerate(sentences):
        if sent.start <= position < sent.end:
            return i
    return None


def target_qids_present(markup: str) -> set[str]:
    """Target qids of all main-body anchors (fast scan for revision diffing)."""
    parsed = _parse_markup(markup)
    return {a.target_qid for a in parsed.anchors}


@dataclass
class IngestCounts:
    parsed: int = 0
    admitted: int = 0
    rejected_no_lead: int = 0
    rejected_missing_qid: int = 0
    empty_anchors: int = 0
    links: int = 0


def _parse_one(raw: RawArticle) -> tuple[_ParsedMarkup, ArticleRecord]:
    parsed = _parse_markup(raw.markup)
    return parsed, _build_record(parsed, raw)


def ingest_articles(
    raws: list[RawArticle], workers: int = 1
) -> tuple[list[ArticleRecord], list[LinkRecord], IngestCounts]:
    """Parse a batch of articles and extract links against the batch itself.

    The target index is built from the admitted articles, so links pointing
    at rejected or absent targets are dropped, as are links out of rejected
    sources. Output preserves input order regardless of `workers`.
    """
    counts = IngestCounts()
    if workers > 1 and len(raws) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as executor:
            parse_results = list(executor.map(_parse_one, raws))
    else:
        parse_results = [_parse_one(raw) for raw in raws]

    parsed_pairs: list[tuple[_ParsedMarkup, ArticleRecord]] = []
    seen_qids: set[str] = set()
    target_index: dict[str, tuple[str, str]] = {}
    for parsed, record in parse_results:
        counts.parsed += 1
        counts.empty_anchors += parsed.empty_anchors
        reason = record.admission_error()
        if reason == "no lead":
            counts.rejected_no_lead += 1
            continue
        if reason == "missing qid":
            counts.rejected_missing_qid += 1
            continue
        if record.qid in seen_qids:
            raise DataError(f"duplicate qid {record.qid!r} in snapshot")
        seen_qids.add(record.qid)
        counts.admitted += 1
        parsed_pairs.append((parsed, record))
        target_index[record.qid] = (record.title, record.lead)
    articles = []
    links = []
    for parsed, record in parsed_pairs:
        articles.append(record)
        extracted = _build_links(parsed, record, target_index, CONTEXT_HALF_WIDTH)
        counts.links += len(extracted)
        links.extend(extracted)
    return articles, links, counts
