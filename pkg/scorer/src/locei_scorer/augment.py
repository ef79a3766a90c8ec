"""Training-time dynamic context removal.

Reimplements the removal semantics over the ndjson example schema (this
package does not import the corpus engine): keep (rm_nth), drop the mention
(rm_mention), drop its sentence (rm_sent), or drop a 2-5 sentence block
containing it (rm_span), falling back to a less aggressive strategy whenever
the draw would empty the context. Sentence splitting here is simple
space-based segmentation.
"""
from __future__ import annotations

import random

from .data import Example

STRATEGIES = ("rm_nth", "rm_mention", "rm_sent", "rm_span")
AGGRESSIVENESS = ("rm_span", "rm_sent", "rm_mention", "rm_nth")
DEFAULT_WEIGHTS = (0.4, 0.2, 0.3, 0.1)

_TERMINALS = ".!?"


def split_sentences(text: str) -> list[tuple[int, int]]:
    """(start, end) spans; terminal punctuation + space + upper/digit splits."""
    breaks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            breaks.append(i + 1)
            i += 1
            continue
        if ch in _TERMINALS:
            while i < n and text[i] in _TERMINALS:
                i += 1
            if i < n and text[i].isspace():
                k = i
                while k < n and text[k].isspace():
                    k += 1
                if k < n and (text[k].isupper() or text[k].isdigit()):
                    breaks.append(k)
            continue
        i += 1
    spans, start = [], 0
    for brk in breaks + [n]:
        raw = text[start:brk]
        stripped = raw.strip()
        if stripped:
            lead = len(raw) - len(raw.lstrip())
            spans.append((start + lead, start + lead + len(stripped)))
        start = brk
    return spans


def feasibility(example: Example) -> dict[str, bool]:
    prov = example.provenance
    if prov is None:
        raise ValueError("example lacks positional provenance; cannot augment")
    gold_text = example.candidates[example.gold_index].text
    n = len(split_sentences(gold_text))
    without_mention = gold_text[: prov.mention_start] + gold_text[prov.mention_end :]
    return {
        "rm_nth": True,
        "rm_mention": bool(without_mention.strip()),
        "rm_sent": n >= 2,
        "rm_span": n >= 3,
    }


def sample_strategy(rng: random.Random, weights, feasible: dict[str, bool]) -> str:
    draw = rng.random()
    cumulative = 0.0
    chosen = STRATEGIES[-1]
    for name, weight in zip(STRATEGIES, weights):
        cumulative += weight
        if draw < cumulative:
            chosen = name
            break
    if feasible.get(chosen, False):
        return chosen
    for name in AGGRESSIVENESS[AGGRESSIVENESS.index(chosen) + 1 :]:
        if feasible.get(name, False):
            return name
    return "rm_nth"


def removed_range(example: Example, strategy: str, rng: random.Random) -> tuple[int, int]:
    prov = example.provenance
    gold_text = example.candidates[example.gold_index].text
    if strategy == "rm_nth":
        return (0, 0)
    if strategy == "rm_mention":
        start, end = prov.mention_start, prov.mention_end
        if 0 < start and end < len(gold_text) and gold_text[start - 1].isspace() and gold_text[end].isspace():
            end += 1
        return (start, end)
    sentences = split_sentences(gold_text)
    mention_idx = next(
        i for i, (s, e) in enumerate(sentences) if s <= prov.mention_start < e
    )
    if strategy == "rm_sent":
        start_idx, size = mention_idx, 1
    else:
        n = len(sentences)
        k = rng.randint(2, 5)
        size = min(k, n - 1)
        lo = max(0, mention_idx - size + 1)
        hi = min(mention_idx, n - size)
        start_idx = rng.randint(lo, hi)
    start = sentences[start_idx][0]
    end_idx = start_idx + size - 1
    end = sentences[end_idx + 1][0] if end_idx + 1 < len(sentences) else len(gold_text)
    return (start, end)


def augment_gold_text(example: Example, weights, rng: random.Random) -> tuple[str, str]:
    """(strategy, rewritten gold text) for one training visit."""
    strategy = sample_strategy(rng, weights, feasibility(example))
    start, end = removed_range(example, strategy, rng)
    gold_text = example.candidates[example.gold_index].text
    rewritten = gold_text[:start] + gold_text[end:]
    if not rewritten.strip():
        raise ValueError(f"strategy {strategy} emptied the context")
    return strategy, rewritten
