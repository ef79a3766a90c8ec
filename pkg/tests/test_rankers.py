import random
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linkforge.errors import InvariantError, ScorerProtocolError
from linkforge.rankers import (
    Bm25Params,
    ExternalScorer,
    bm25_scores,
    build_bm25_index,
    rank_bm25,
    rank_external,
    rank_random,
    rank_string_match,
)
from linkforge.records import Ranking

from conftest import make_example

# --- rank_random ----------------------------------------------------------------


def test_single_candidate_always_rank_one():
    example = make_example(["only candidate text"], 0)
    ranking = rank_random(example, random.Random(5))
    assert ranking.order == (0,)


def test_random_deterministic_under_seed():
    example = make_example([f"candidate {i}" for i in range(8)], 3)
    a = rank_random(example, random.Random(42))
    b = rank_random(example, random.Random(42))
    assert a == b
    c = rank_random(example, random.Random(43))
    assert a != c


def test_random_uniform_chi_square():
    """Gold-rank distribution over 100k trials is uniform (chi-square oracle)."""
    from scipy.stats import chisquare

    d = 10
    example = make_example([f"candidate {i}" for i in range(d)], 4)
    rng = random.Random(13)
    counts = [0] * d
    for _ in range(100_000):
        ranking = rank_random(example, rng)
        counts[ranking.rank_of(example.gold_index) - 1] += 1
    result = chisquare(counts)
    assert result.pvalue > 0.01


# --- rank_string_match ------------------------------------------------------------


def test_mention_candidate_ranked_first():
    example = make_example(
        ["plain filler one", "the town of Nurmijärvi appears", "plain filler two"],
        1,
        mentions=("Nurmijärvi",),
    )
    ranking = rank_string_match(example)
    assert ranking.order[0] == 1
    assert ranking.scores == (0.0, 1.0, 0.0)


def test_no_mention_yields_index_order():
    example = make_example(["aa", "bb", "cc"], 0, mentions=("zz",))
    assert rank_string_match(example).order == (0, 1, 2)


def test_empty_mentions_index_order():
    example = make_example(["aa", "bb", "cc"], 2, mentions=())
    assert rank_string_match(example).order == (0, 1, 2)


def test_mention_containing_above_non_containing():
    # within a valid example only the gold may contain target mentions, so
    # the containing-above-non-containing property pins the gold at rank 1
    texts = ["x one", "needle here with other words", "x two", "x three"]
    example = make_example(texts, 1, mentions=("needle", "absent phrase"))
    ranking = rank_string_match(example)
    assert ranking.order[0] == 1
    assert all(ranking.scores[i] == 0.0 for i in range(len(texts)) if i != 1)


# --- BM25 -------------------------------------------------------------------------

DOCS = [
    "the quick brown fox jumps over the lazy dog",
    "a fast auburn fox vaulted a sleepy hound",
    "quick foxes and lazy dogs are a classic pangram subject",
]
QUERY_LEAD = "The quick brown fox is a classic pangram subject."

# Frozen output of the independent oracle (Fraction arithmetic + math.log,
# per-term hand evaluation of the smoothed-idf Okapi formula), k1=1.5 b=0.75.
EXPECTED = [3.3220211586628063, 1.1910423353205775, 3.6976143024063326]


def test_avgdl_is_mean_length():
    index = build_bm25_index(DOCS)
    assert index.avgdl == (9 + 8 + 10) / 3
    assert index.doc_lens == (9, 8, 10)


def test_absent_token_df_zero_smoothed():
    index = build_bm25_index(DOCS)
    assert "zebra" not in index.doc_freq
    scores = bm25_scores(index, ["zebra"], Bm25Params())
    assert scores == [0.0, 0.0, 0.0]


def test_repeated_candidate_texts_identical_tables():
    index = build_bm25_index(["same text twice", "same text twice"])
    assert index.term_freqs[0] == index.term_freqs[1]


def test_hand_evaluated_fixture_to_1e9():
    example = make_example(DOCS, 0, lead=QUERY_LEAD)
    ranking = rank_bm25(example)
    for got, expected in zip(ranking.scores, EXPECTED):
        assert abs(got - expected) <= 1e-9


def test_single_discriminative_term():
    example = make_example(
        ["nothing to see", "the word zebra appears here", "nothing again"],
        0,
        lead="A zebra.",
    )
    assert rank_bm25(example).order[0] == 1


def test_b_zero_length_invariance():
    base = "shared term appears"
    padded = base + " " + " ".join(f"pad{i}" for i in range(40))
    example = make_example([base, padded], 0, lead="shared term")
    scores = rank_bm25(example, Bm25Params(k1=1.5, b=0.0)).scores
    assert scores[0] == pytest.approx(scores[1], abs=1e-12)
    # with b > 0 the padded document scores lower
    scores_b = rank_bm25(example, Bm25Params(k1=1.5, b=0.75)).scores
    assert scores_b[0] > scores_b[1]


def test_empty_lead_index_order():
    example = make_example(["aa", "bb"], 0, lead="")
    ranking = rank_bm25(example)
    assert ranking.scores == (0.0, 0.0)
    assert ranking.order == (0, 1)


def test_query_duplication_invariance():
    index = build_bm25_index(DOCS)
    once = bm25_scores(index, ["fox", "lazy"], Bm25Params())
    doubled = bm25_scores(index, ["fox", "lazy", "fox", "fox"], Bm25Params())
    assert once == doubled


@given(st.integers(1, 6), st.integers(0, 5))
@settings(max_examples=40, deadline=None)
def test_monotonicity_in_term_frequency(extra, which):
    """Adding occurrences of a query term never lowers that candidate's score."""
    texts = ["alpha beta", "gamma delta", "epsilon zeta"]
    which = which % len(texts)
    grown = list(texts)
    grown[which] = grown[which] + " needle" * extra
    base_scores = bm25_scores(build_bm25_index(texts), ["needle"], Bm25Params())
    grown_scores = bm25_scores(build_bm25_index(grown), ["needle"], Bm25Params())
    assert grown_scores[which] >= base_scores[which]


def test_params_validation():
    with pytest.raises(InvariantError):
        Bm25Params(k1=-0.1)
    with pytest.raises(InvariantError):
        Bm25Params(b=1.5)


def test_stop_list_removes_keywords():
    example = make_example(
        ["the common filler", "a rare gem appears", "the common words"],
        0,
        lead="the gem",
    )
    plain = rank_bm25(example)
    stopped = rank_bm25(example, stop_words=frozenset({"the"}))
    # with "the" stopped, only "gem" discriminates: candidate 1 wins
    assert stopped.order[0] == 1
    assert stopped.scores[0] == 0.0 and stopped.scores[2] == 0.0
    assert plain.scores[0] > 0.0  # "the" counted without the stop list


# --- permutation consistency -------------------------------------------------------


def test_rankers_permutation_consistent():
    """Shuffling candidates and unshuffling recovers the same identity ranking
    (tie-free inputs)."""
    texts = [
        "needle",
        "needle needle pad",
        "needle needle needle pad pad pad pad",
        "pad pad",
        "needle pad pad pad pad pad pad pad pad",
        "needle needle pad pad pad pad pad pad pad pad pad pad",
    ]
    lead = "needle"
    example = make_example(texts, 0, lead=lead)
    base = rank_bm25(example)
    assert len(set(base.scores)) == len(base.scores)  # tie-free construction
    base_identity = [texts[i] for i in base.order]

    perm = [3, 0, 5, 1, 4, 2]
    shuffled_texts = [texts[p] for p in perm]
    shuffled = make_example(shuffled_texts, perm.index(0), lead=lead)
    got = rank_bm25(shuffled)
    got_identity = [shuffled_texts[i] for i in got.order]
    assert got_identity == base_identity


# --- external scorer protocol --------------------------------------------------------

ECHO_SCORER = r"""
import json, sys
for line in sys.stdin:
    msg = json.loads(line)
    if msg["type"] == "hello":
        print(json.dumps({"type": "ready", "name": "echo"}), flush=True)
    elif msg["type"] == "score":
        scores = list(range(len(msg["candidates"])))
        print(json.dumps({"type": "scores", "example_id": msg["example_id"],
                          "scores": scores}), flush=True)
"""

SHORT_SCORER = ECHO_SCORER.replace(
    'scores = list(range(len(msg["candidates"])))',
    'scores = list(range(len(msg["candidates"]) - 1))',
)

NAN_SCORER = ECHO_SCORER.replace(
    'scores = list(range(len(msg["candidates"])))',
    'scores = [float("nan")] * len(msg["candidates"])',
)

GARBAGE_SCORER = ECHO_SCORER.replace(
    'print(json.dumps({"type": "scores", "example_id": msg["example_id"],\n'
    '                          "scores": scores}), flush=True)',
    'print("this is not json", flush=True)',
)

SLEEPY_SCORER = ECHO_SCORER.replace(
    'scores = list(range(len(msg["candidates"])))',
    'import time; time.sleep(5); scores = list(range(len(msg["candidates"])))',
)


def scorer_cmd(source: str) -> list:
    return [sys.executable, "-u", "-c", source]


def test_echo_scorer_reverse_index_order():
    example = make_example([f"c{i}" for i in range(5)], 0)
    with ExternalScorer(scorer_cmd(ECHO_SCORER)) as scorer:
        assert scorer.name == "echo"
        ranking = rank_external(example, scorer)
    assert ranking.order == (4, 3, 2, 1, 0)


def test_short_reply_names_counts():
    example = make_example([f"c{i}" for i in range(4)], 0)
    with ExternalScorer(scorer_cmd(SHORT_SCORER)) as scorer:
        with pytest.raises(ScorerProtocolError, match="expected 4, got 3"):
            rank_external(example, scorer)


def test_nan_reply_rejected():
    example = make_example(["c0", "c1"], 0)
    with ExternalScorer(scorer_cmd(NAN_SCORER)) as scorer:
        with pytest.raises(ScorerProtocolError, match="non-finite"):
            rank_external(example, scorer)


def test_garbage_reply_rejected():
    example = make_example(["c0", "c1"], 0)
    with ExternalScorer(scorer_cmd(GARBAGE_SCORER)) as scorer:
        with pytest.raises(ScorerProtocolError, match="invalid JSON"):
            rank_external(example, scorer)


def test_timeout_raises():
    example = make_example(["c0", "c1"], 0)
    with ExternalScorer(scorer_cmd(SLEEPY_SCORER), timeout=0.5) as scorer:
        with pytest.raises(ScorerProtocolError, match="timed out"):
            rank_external(example, scorer)


def test_missing_handshake_rejected():
    silent = "import sys\nfor line in sys.stdin: pass\n"
    scorer = ExternalScorer(scorer_cmd(silent), timeout=0.5)
    with pytest.raises(ScorerProtocolError):
        scorer.start()
    scorer.close()
