import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linkforge.errors import InvariantError, ParseError
from linkforge.records import (
    ArticleRecord,
    AugmentedExample,
    CandidateSpan,
    GoldProvenance,
    InsertionEvent,
    InsertionScenario,
    LinkRecord,
    Ranking,
    RankingExample,
    Section,
    Sentence,
    TargetEntity,
    deserialize_record,
    header_line,
    parse_header,
    read_records,
    serialize_record,
    write_records,
)

# --- strategies --------------------------------------------------------------

_word = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd")), min_size=1, max_size=8
)
_words = st.lists(_word, min_size=1, max_size=12).map(" ".join)


@st.composite
def link_records(draw):
    pre = draw(_words)
    mention = draw(_word)
    post = draw(_words)
    sentence = f"{pre} {mention} {post}."
    lead_in = draw(st.sampled_from(["", "Earlier sentence. ", "One. Two. "]))
    context = lead_in + sentence
    s_start = len(lead_in)
    m_start = s_start + len(pre) + 1
    return LinkRecord(
        src_qid="Q" + str(draw(st.integers(1, 999))),
        tgt_qid="Q" + str(draw(st.integers(1000, 1999))),
        src_title=draw(_words),
        tgt_title=draw(_words),
        tgt_lead=draw(_words),
        section_title=draw(_word),
        context=context,
        mention=mention,
        mention_start=m_start,
        mention_end=m_start + len(mention),
        sentence_start=s_start,
        sentence_end=len(context),
        lang=draw(st.sampled_from(["en", "fr", "ja", "sw"])),
    )


@st.composite
def sectioned_articles(draw):
    sections = []
    for title in draw(st.lists(_word, min_size=1, max_size=3, unique=True)):
        n = draw(st.integers(1, 4))
        texts = [draw(_words) + "." for _ in range(n)]
        joined = " ".join(texts)
        sentences, pos = [], 0
        for t in texts:
            start = joined.index(t, pos)
            sentences.append(Sentence(t, start, start + len(t)))
            pos = start + len(t)
        sections.append(Section(title=title, text=joined, sentences=tuple(sentences)))
    return ArticleRecord(
        article_id=draw(st.text("0123456789abcdef", min_size=16, max_size=16)),
        title=draw(_words),
        qid="Q" + str(draw(st.integers(1, 9999))),
        lang=draw(st.sampled_from(["en", "de", "hi"])),
        lead=draw(_words),
        sections=tuple(sections),
        snapshot="2023-10-01",
    )


@st.composite
def ranking_examples(draw):
    mention = "zzunique"
    n = draw(st.integers(2, 6))
    texts = [draw(_words) + f" filler{i}" for i in range(n)]
    gold_index = draw(st.integers(0, n - 1))
    texts[gold_index] = f"gold sentence with {mention} inside."
    candidates = tuple(
        CandidateSpan(
            article_id="f" * 16,
            section_title="Body",
            anchor_index=i,
            window=draw(st.integers(0, 5)),
            text=t,
            is_gold=(i == gold_index),
        )
        for i, t in enumerate(texts)
    )
    return RankingExample(
        example_id=draw(st.text("0123456789abcdef", min_size=8, max_size=16)),
        target=TargetEntity(title=draw(_words), lead=draw(_words), mentions=(mention,)),
        candidates=candidates,
        gold_index=gold_index,
        scenario=draw(st.sampled_from(list(InsertionScenario))),
        lang="en",
    )


# --- round trips -------------------------------------------------------------


@settings(max_examples=250)
@given(link_records())
def test_link_round_trip(link):
    line = serialize_record(link)
    assert "\n" not in line
    back = deserialize_record(line, "link")
    assert back == link
    # offset integrity: mention slice exact, sentence slice contains it
    assert back.context[back.mention_start : back.mention_end] == back.mention
    assert back.mention in back.context[back.sentence_start : back.sentence_end]


@settings(max_examples=250)
@given(sectioned_articles())
def test_article_round_trip(article):
    line = serialize_record(article)
    assert deserialize_record(line, "article") == article


@settings(max_examples=250)
@given(ranking_examples())
def test_example_round_trip(example):
    line = serialize_record(example)
    assert deserialize_record(line, "example") == example


@settings(max_examples=250)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_ranking_round_trip(scores):
    ranking = Ranking.from_scores("ex", scores)
    line = serialize_record(ranking)
    assert deserialize_record(line, "ranking") == ranking


def test_event_and_augmented_round_trip(snapshot_a):
    _, links = snapshot_a
    link = links[0]
    event = InsertionEvent(
        link=link,
        scenario=InsertionScenario.MISSING_SENTENCE,
        before_version_id="v0",
        after_version_id="v1",
        insertion_section=link.section_title,
        insertion_anchor=0,
    )
    assert deserialize_record(serialize_record(event), "event") == event

    gold = CandidateSpan("a" * 16, "Body", 0, 5, link.context, is_gold=True)
    other = CandidateSpan("a" * 16, "Body", 1, 5, "Unrelated filler text here.")
    example = RankingExample(
        example_id="ex1",
        target=TargetEntity("T", "L", ()),
        candidates=(gold, other),
        gold_index=0,
        scenario=InsertionScenario.TEXT_PRESENT,
        lang="en",
        gold_provenance=GoldProvenance(
            mention=link.mention,
            mention_start=link.mention_start,
            mention_end=link.mention_end,
            sentence_start=link.sentence_start,
            sentence_end=link.sentence_end,
        ),
    )
    augmented = AugmentedExample(base=example, applied_strategy="rm_nth", removed_range=(0, 0))
    assert deserialize_record(serialize_record(augmented), "augmented") == augmented


# --- spec'd rejections -------------------------------------------------------


def test_serialize_round_trip_identity_for_offsets():
    ctx = "The value was measured at room temperature in the lab."
    link = LinkRecord(
        src_qid="Q1", tgt_qid="Q2", src_title="S", tgt_title="T", tgt_lead="L",
        section_title="Body", context=ctx, mention="room temperature",
        mention_start=26, mention_end=42, sentence_start=0, sentence_end=len(ctx),
        lang="en",
    )
    back = deserialize_record(serialize_record(link), "link")
    assert (back.mention_start, back.mention_end) == (26, 42)
    assert back.context[back.mention_start : back.mention_end] == "room temperature"


def test_article_with_empty_qid_rejected():
    article = ArticleRecord(
        article_id="0" * 16, title="T", qid="", lang="en", lead="Lead.",
        sections=(), snapshot="s",
    )
    with pytest.raises(InvariantError, match="missing qid"):
        serialize_record(article)


def test_article_with_empty_lead_rejected():
    article = ArticleRecord(
        article_id="0" * 16, title="T", qid="Q1", lang="en", lead="  ",
        sections=(), snapshot="s",
    )
    with pytest.raises(InvariantError, match="no lead"):
        serialize_record(article)


def test_candidate_span_empty_text_rejected():
    with pytest.raises(InvariantError, match="empty span"):
        CandidateSpan("a" * 16, "Body", 0, 5, "   ")


def test_mention_offsets_out_of_order_rejected():
    line = json.dumps(
        {
            "src_qid": "Q1", "tgt_qid": "Q2", "src_title": "S", "tgt_title": "T",
            "tgt_lead": "L", "section_title": "B", "context": "some words here",
            "mention": "words", "mention_start": 9, "mention_end": 5,
            "sentence_start": 0, "sentence_end": 15, "lang": "en",
        }
    )
    with pytest.raises(InvariantError, match="mention_start < mention_end"):
        deserialize_record(line, "link")


def test_self_link_rejected():
    with pytest.raises(InvariantError, match="self-link"):
        LinkRecord(
            src_qid="Q1", tgt_qid="Q1", src_title="S", tgt_title="T", tgt_lead="L",
            section_title="B", context="a b", mention="a", mention_start=0,
            mention_end=1, sentence_start=0, sentence_end=3, lang="en",
        )


def test_truncated_line_is_parse_error_with_offset():
    link_line = serialize_record_sample()
    truncated = link_line[: len(link_line) // 2]
    with pytest.raises(ParseError, match="byte"):
        deserialize_record(truncated, "link")


def serialize_record_sample() -> str:
    ctx = "alpha beta gamma."
    return serialize_record(
        LinkRecord(
            src_qid="Q1", tgt_qid="Q2", src_title="S", tgt_title="T", tgt_lead="L",
            section_title="B", context=ctx, mention="beta", mention_start=6,
            mention_end=10, sentence_start=0, sentence_end=len(ctx), lang="en",
        )
    )


def test_non_gold_candidate_containing_mention_rejected():
    gold = CandidateSpan("a" * 16, "Body", 0, 5, "gold text with BM25 inside", is_gold=True)
    bad = CandidateSpan("a" * 16, "Body", 1, 5, "the BM25 formula appears here")
    with pytest.raises(InvariantError, match="contains a target mention"):
        RankingExample(
            example_id="x",
            target=TargetEntity("T", "L", ("BM25",)),
            candidates=(gold, bad),
            gold_index=0,
            scenario=InsertionScenario.TEXT_PRESENT,
            lang="en",
        )


def test_ranking_rejects_non_finite_and_bad_order():
    with pytest.raises(InvariantError, match="non-finite"):
        Ranking(example_id="x", scores=(float("nan"), 1.0), order=(0, 1))
    with pytest.raises(InvariantError, match="stable descending"):
        Ranking(example_id="x", scores=(1.0, 2.0), order=(0, 1))
    r = Ranking.from_scores("x", [1.0, 2.0, 2.0])
    assert r.order == (1, 2, 0)  # descending, ties by ascending index


# --- files -------------------------------------------------------------------


def test_header_and_file_round_trip(tmp_path, snapshot_a):
    articles, links = snapshot_a
    path = tmp_path / "x.links.ndjson"
    count = write_records(path, "link", links)
    assert count == len(links)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert parse_header(lines[0]) == "link"
    assert list(read_records(path, "link")) == list(links)


def test_read_records_rejects_wrong_kind(tmp_path, snapshot_a):
    _, links = snapshot_a
    path = tmp_path / "x.links.ndjson"
    write_records(path, "link", links)
    with pytest.raises(ParseError, match="expected kind"):
        list(read_records(path, "article"))


def test_missing_header_rejected(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text("not a header\n", encoding="utf-8")
    with pytest.raises(ParseError, match="header"):
        list(read_records(path))


def test_header_line_is_stable():
    assert header_line("link") == '{"kind":"link","schema":"linkforge/v1"}'
