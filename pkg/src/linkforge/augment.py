"""Dynamic context removal: rewrite gold contexts of existing-link examples
to simulate the missing-text insertion scenarios.

Four strategies, from least to most aggressive: keep everything (rm_nth),
excise the mention (rm_mention), drop the mention's sentence (rm_sent), drop
a 2-5 sentence block containing it (rm_span). A drawn strategy that would
empty the context falls back along that order to the first feasible one;
rm_nth always works. Augmentation is applied per training visit, never
materialized into the base example.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import DataError, InvariantError
from .records import AugmentedExample, RankingExample
from .segmentation import segment_sentences
from .textnorm import stable_hash64

STRATEGIES = ("rm_nth", "rm_mention", "rm_sent", "rm_span")
#: Most aggressive first; infeasible draws fall back to the right.
AGGRESSIVENESS = ("rm_span", "rm_sent", "rm_mention", "rm_nth")

SPAN_MIN = 2
SPAN_MAX = 5


@dataclass(frozen=True)
class RemovalWeights:
    rm_nth: float = 0.4
    rm_mention: float = 0.2
    rm_sent: float = 0.3
    rm_span: float = 0.1

    def __post_init__(self):
        values = self.as_tuple()
        if any(w < 0 for w in values):
            raise InvariantError("removal weights must be >= 0")
        if abs(sum(values) - 1.0) > 1e-9:
            raise InvariantError(f"removal weights must sum to 1.0, got {sum(values)!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.rm_nth, self.rm_mention, self.rm_sent, self.rm_span)

    @classmethod
    def parse(cls, spec: str) -> "RemovalWeights":
        """Parse 'nth,mention,sent,span' (the CLI --weights format)."""
        parts = [float(p) for p in spec.split(",")]
        if len(parts) != 4:
            raise DataError(f"expected 4 comma-separated weights, got {len(parts)}")
        return cls(*parts)


def _context_sentences(example: RankingExample):
    gold = example.gold
    return segment_sentences(gold.text, example.lang)


def _mention_sentence_index(sentences, mention_start: int) -> int:
    for i, (_, start, end) in enumerate(sentences):
        if start <= mention_start < end:
            return i
    raise DataError("mention offset outside every sentence of the gold context")


def strategy_feasibility(example: RankingExample) -> dict[str, bool]:
    """Which strategies leave a non-empty gold context for this example."""
    if example.gold_provenance is None:
        raise DataError("example lacks positional provenance; cannot augment")
    gold_text = example.gold.text
    prov = example.gold_provenance
    n = len(_context_sentences(example))
    without_mention = gold_text[: prov.mention_start] + gold_text[prov.mention_end :]
    return {
        "rm_nth": True,
        "rm_mention": bool(without_mention.strip()),
        "rm_sent": n >= 2,
        # A block of >= 2 sentences must go while >= 1 survives.
        "rm_span": n >= 3,
    }


def sample_strategy(
    rng: random.Random,
    weights: RemovalWeights,
    feasibility: dict[str, bool],
) -> str:
    """Draw a strategy by weight; fall back to less aggressive when infeasible."""
    draw = rng.random()
    cumulative = 0.0
    chosen = STRATEGIES[-1]
    for name, weight in zip(STRATEGIES, weights.as_tuple()):
        cumulative += weight
        if draw < cumulative:
            chosen = name
            break
    if feasibility.get(chosen, False):
        return chosen
    start = AGGRESSIVENESS.index(chosen)
    for name in AGGRESSIVENESS[start + 1 :]:
        if feasibility.get(name, False):
            return name
    return "rm_nth"


def apply_removal(
    example: RankingExample,
    strategy: str,
    rng: random.Random,
) -> AugmentedExample:
    """Apply one removal strategy; caller must have checked feasibility."""
    if strategy not in STRATEGIES:
        raise DataError(f"unknown removal strategy {strategy!r}")
    prov = example.gold_provenance
    if prov is None:
        raise DataError("example lacks positional provenance; cannot augment")
    gold_text = example.gold.text

    if strategy == "rm_nth":
        removed = (0, 0)
    elif strategy == "rm_mention":
        start, end = prov.mention_start, prov.mention_end
        if (
            start > 0
            and end < len(gold_text)
            and gold_text[start - 1].isspace()
            and gold_text[end].isspace()
        ):
            end += 1  # avoid doubled whitespace
        removed = (start, end)
    else:
        sentences = _context_sentences(example)
        mention_idx = _mention_sentence_index(sentences, prov.mention_start)
        if strategy == "rm_sent":
            removed = _sentence_block_range(gold_text, sentences, mention_idx, 1)
        else:  # rm_span
            n = len(sentences)
            k = rng.randint(SPAN_MIN, SPAN_MAX)
            size = min(k, n - 1)
            lo = max(0, mention_idx - size + 1)
            hi = min(mention_idx, n - size)
            start_idx = rng.randint(lo, hi)
            removed = _sentence_block_range(gold_text, sentences, start_idx, size)

    try:
        return AugmentedExample(base=example, applied_strategy=strategy, removed_range=removed)
    except InvariantError as exc:
        raise InvariantError(
            f"strategy {strategy} was infeasible for this example: {exc}"
        ) from None


def _sentence_block_range(text: str, sentences, start_idx: int, size: int) -> tuple[int, int]:
    """Character range removing `size` sentences starting at `start_idx`,
    consuming the trailing gap (or the whole tail for a final block)."""
    end_idx = start_idx + size - 1
    start = sentences[start_idx][1]
    if end_idx + 1 < len(sentences):
        end = sentences[end_idx + 1][1]
    else:
        end = len(text)
    return (start, end)


def augment_example(
    example: RankingExample,
    weights: RemovalWeights,
    rng: random.Random,
) -> AugmentedExample:
    """Sample a feasible strategy and apply it."""
    feasibility = strategy_feasibility(example)
    strategy = sample_strategy(rng, weights, feasibility)
    return apply_removal(example, strategy, rng)


def augment_stream(examples, weights: RemovalWeights, seed: int):
    """Augment a stream with per-example derived seeds (order-independent)."""
    for example in examples:
        rng = random.Random(seed ^ stable_hash64(example.example_id))
        yield augment_example(example, weights, rng)
