import shutil
from pathlib import Path

import pytest

from linkforge.ingest import ingest_articles, load_raw_article
from linkforge.records import (
    ArticleRecord,
    CandidateSpan,
    InsertionScenario,
    RankingExample,
    Section,
    Sentence,
    TargetEntity,
)
from linkforge.segmentation import segment_sentences
from linkforge.textnorm import article_id_for

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture()
def scratch_corpus(tmp_path) -> Path:
    """Private copy of the fixture corpus for tests that write outputs."""
    dest = tmp_path / "corpus"
    shutil.copytree(CORPUS, dest)
    return dest


def read_markup(snapshot: str, name: str) -> str:
    return (CORPUS / "snapshots" / snapshot / f"{name}.html").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def snapshot_a():
    """(articles, links) ingested from the fixture snapshot A."""
    raws = [
        load_raw_article(p.read_text(encoding="utf-8"), snapshot="2023-09-01")
        for p in sorted((CORPUS / "snapshots" / "a").iterdir())
    ]
    articles, links, _ = ingest_articles(raws)
    return articles, links


@pytest.fixture(scope="session")
def snapshot_b():
    raws = [
        load_raw_article(p.read_text(encoding="utf-8"), snapshot="2023-10-01")
        for p in sorted((CORPUS / "snapshots" / "b").iterdir())
    ]
    articles, links, _ = ingest_articles(raws)
    return articles, links


def make_article(
    qid: str = "Q1",
    title: str = "Article",
    lang: str = "en",
    snapshot: str = "s0",
    section_texts: dict | None = None,
    lead: str | None = None,
) -> ArticleRecord:
    """Article from {section title: text}; sentences via the real segmenter."""
    if section_texts is None:
        section_texts = {"Introduction": "A lead sentence."}
    sections = []
    for sec_title, text in section_texts.items():
        sentences = tuple(Sentence(t, s, e) for t, s, e in segment_sentences(text, lang))
        sections.append(Section(title=sec_title, text=text, sentences=sentences))
    if lead is None:
        lead = sections[0].text.split("\n", 1)[0] if sections else ""
    return ArticleRecord(
        article_id=article_id_for(lang, title, snapshot),
        title=title,
        qid=qid,
        lang=lang,
        lead=lead,
        sections=tuple(sections),
        snapshot=snapshot,
    )


def make_example(
    candidate_texts: list[str],
    gold_index: int,
    mentions: tuple[str, ...] = (),
    lead: str = "Target lead text.",
    example_id: str = "ex-1",
    scenario: InsertionScenario = InsertionScenario.TEXT_PRESENT,
    lang: str = "en",
) -> RankingExample:
    candidates = tuple(
        CandidateSpan(
            article_id="a" * 16,
            section_title="Body",
            anchor_index=i,
            window=5,
            text=text,
            is_gold=(i == gold_index),
        )
        for i, text in enumerate(candidate_texts)
    )
    return RankingExample(
        example_id=example_id,
        target=TargetEntity(title="Target", lead=lead, mentions=mentions),
        candidates=candidates,
        gold_index=gold_index,
        scenario=scenario,
        lang=lang,
    )
