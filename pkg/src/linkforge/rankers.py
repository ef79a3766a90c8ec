"""Baseline rankers and the external-scorer protocol client.

Random permutes scores uniformly, String Match scores mention containment,
BM25 ranks candidates against the target lead with per-example corpus
statistics. External scorers are separate processes speaking newline-
delimited JSON over stdio (protocol ``linkforge-scorer/1``); any learned
model can plug in behind that protocol.
"""
from __future__ import annotations

import json
import math
import queue
import random
import shlex
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass

from .errors import DataError, InvariantError, ScorerProtocolError
from .records import Ranking, RankingExample
from .textnorm import contains_any_mention, tokenize

PROTOCOL = "linkforge-scorer/1"
DEFAULT_TIMEOUT = 60.0


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise InvariantError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise InvariantError(f"b must be in [0, 1], got {self.b}")


def rank_random(example: RankingExample, rng: random.Random) -> Ranking:
    """Scores are a uniformly random permutation of 0..D-1."""
    scores = list(range(len(example.candidates)))
    rng.shuffle(scores)
    return Ranking.from_scores(example.example_id, (float(s) for s in scores))


def rank_string_match(example: RankingExample) -> Ranking:
    """1.0 for candidates containing any previously used mention, else 0.0."""
    scores = [
        1.0 if contains_any_mention(c.text, example.target.mentions) else 0.0
        for c in example.candidates
    ]
    return Ranking.from_scores(example.example_id, scores)


@dataclass(frozen=True)
class Bm25Index:
    term_freqs: tuple[dict, ...]
    doc_lens: tuple[int, ...]
    doc_freq: dict
    avgdl: float

    @property
    def size(self) -> int:
        return len(self.doc_lens)


def build_bm25_index(candidate_texts, stop_words=frozenset()) -> Bm25Index:
    """Per-candidate term statistics; the example's candidate set is the corpus."""
    term_freqs = []
    doc_lens = []
    doc_freq: Counter = Counter()
    for text in candidate_texts:
        tokens = [t for t in tokenize(text) if t not in stop_words]
        tf = Counter(tokens)
        term_freqs.append(dict(tf))
        doc_lens.append(len(tokens))
        for term in tf:
            doc_freq[term] += 1
    if not doc_lens:
        raise DataError("cannot index an empty candidate list")
    avgdl = sum(doc_lens) / len(doc_lens)
    return Bm25Index(
        term_freqs=tuple(term_freqs),
        doc_lens=tuple(doc_lens),
        doc_freq=dict(doc_freq),
        avgdl=avgdl,
    )


def bm25_scores(index: Bm25Index, query_tokens, params: Bm25Params) -> list[float]:
    """Okapi BM25 with the smoothed idf ln(1 + (D - df + 0.5) / (df + 0.5))."""
    d = index.size
    seen = set()
    query = []
    for token in query_tokens:
        if token not in seen:
            seen.add(token)
            query.append(token)
    scores = []
    for tf, dl in zip(index.term_freqs, index.doc_lens):
        if index.avgdl > 0:
            norm = params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
        else:
            norm = params.k1
        score = 0.0
        for term in query:
            f = tf.get(term)
            if not f:
                continue
            df = index.doc_freq.get(term, 0)
            idf = math.log(1.0 + (d - df + 0.5) / (df + 0.5))
            score += idf * f * (params.k1 + 1.0) / (f + norm)
        scores.append(score)
    return scores


def rank_bm25(
    example: RankingExample,
    params: Bm25Params = Bm25Params(),
    stop_words=frozenset(),
) -> Ranking:
    """Query = deduplicated tokens of the target lead (stop words excluded)."""
    index = build_bm25_index((c.text for c in example.candidates), stop_words)
    query = [t for t in tokenize(example.target.lead) if t not in stop_words]
    return Ranking.from_scores(example.example_id, bm25_scores(index, query, params))


# --- external scorer protocol ------------------------------------------------


class ExternalScorer:
    """Client for one scorer process speaking linkforge-scorer/1 over stdio.

    Requests are serialized per connection; replies are matched by
    example_id, so out-of-order replies are legal.
    """

    def __init__(self, command, timeout: float = DEFAULT_TIMEOUT):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.name = None
        self._proc = None
        self._lines: queue.Queue = queue.Queue()
        self._stash: dict[str, list] = {}

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False

    def start(self):
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ScorerProtocolError(f"cannot start scorer {self.command!r}: {exc}") from None
        reader = threading.Thread(target=self._pump, daemon=True)
        reader.start()
        self._send({"type": "hello", "protocol": PROTOCOL})
        reply = self._read_reply()
        if reply.get("type") != "ready" or "name" not in reply:
            raise ScorerProtocolError(f"expected ready handshake, got {reply!r}")
        self.name = reply["name"]

    def _pump(self):
        assert self._proc is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _send(self, obj):
        if self._proc is None or self._proc.stdin is None:
            raise ScorerProtocolError("scorer process not running")
        try:
            self._proc.stdin.write(json.dumps(obj, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise ScorerProtocolError("scorer process closed its input") from None

    def _read_reply(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ScorerProtocolError(f"scorer reply timed out after {self.timeout} s") from None
        if line is None:
            raise ScorerProtocolError("scorer process closed its output")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerProtocolError(f"scorer sent invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ScorerProtocolError("scorer reply is not a JSON object")
        return obj

    def score(self, example: RankingExample) -> list[float]:
        """Request scores for one example; validates count and finiteness."""
        if example.example_id in self._stash:
            return self._finish(example, self._stash.pop(example.example_id))
        request = {
            "type": "score",
            "example_id": example.example_id,
            "target": {
                "title": example.target.title,
                "lead": example.target.lead,
                "mentions": list(example.target.mentions),
            },
            "candidates": [
                {"section": c.section_title, "text": c.text} for c in example.candidates
            ],
        }
        self._send(request)
        while True:
            reply = self._read_reply()
            if reply.get("type") != "scores":
                raise ScorerProtocolError(f"expected scores reply, got type {reply.get('type')!r}")
            if "example_id" not in reply or "scores" not in reply:
                raise ScorerProtocolError("scores reply missing example_id or scores")
            if reply["example_id"] == example.example_id:
                return self._finish(example, reply["scores"])
            self._stash[reply["example_id"]] = reply["scores"]

    def _finish(self, example: RankingExample, scores) -> list[float]:
        expected = len(example.candidates)
        if not isinstance(scores, list) or len(scores) != expected:
            actual = len(scores) if isinstance(scores, list) else type(scores).__name__
            raise ScorerProtocolError(
                f"score count mismatch for {example.example_id}: expected {expected}, got {actual}"
            )
        values = []
        for s in scores:
            if not isinstance(s, (int, float)) or isinstance(s, bool) or not math.isfinite(s):
                raise ScorerProtocolError(
                    f"non-finite or non-numeric score {s!r} for {example.example_id}"
                )
            values.append(float(s))
        return values

    def close(self):
        if self._proc is None:
            return
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            self._proc.kill()
        self._proc = None


def rank_external(example: RankingExample, scorer: ExternalScorer) -> Ranking:
    return Ranking.from_scores(example.example_id, scorer.score(example))


METHODS = ("random", "string_match", "bm25", "external")


def rank_example(
    example: RankingExample,
    method: str,
    *,
    seed: int = 0,
    params: Bm25Params = Bm25Params(),
    scorer: ExternalScorer | None = None,
    stop_words=frozenset(),
) -> Ranking:
    """Dispatch one example to a ranking method (seeded per example)."""
    if method == "random":
        from .candidates import example_rng

        return rank_random(example, example_rng(seed, example.example_id))
    if method == "string_match":
        return rank_string_match(example)
    if method == "bm25":
        return rank_bm25(example, params, stop_words)
    if method == "external":
        if scorer is None:
            raise DataError("external method requires a scorer")
        return rank_external(example, scorer)
    raise DataError(f"unknown ranking method {method!r}")
