"""Scorer input rendering and the hash-bucket tokenizer.

One scoring input concatenates, in this order: marker token, target title,
space-joined previously-used mentions (capped at 10), separator, target lead,
separator, section title, separator, candidate text, separator. Sequences are
tokenized and then truncated from the right, so the leftmost fields (marker
and title) always survive.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

CLS_ID = 0
SEP_ID = 1
PAD_ID = 2
RESERVED = 3

_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class ScorerInput:
    target_title: str
    mentions: tuple[str, ...]
    target_lead: str
    section_title: str
    candidate_text: str

    def __post_init__(self):
        if not self.candidate_text.strip():
            raise ValueError("empty candidate text")


class HashTokenizer:
    """Stable word-level tokenizer mapping tokens into fixed hash buckets.

    No fitted vocabulary: the same token maps to the same id on any machine,
    which keeps checkpoints portable and training deterministic.
    """

    def __init__(self, vocab_size: int = 4096, max_len: int = 192):
        if vocab_size <= RESERVED:
            raise ValueError("vocab_size must exceed the reserved id range")
        self.vocab_size = vocab_size
        self.max_len = max_len

    def token_id(self, token: str) -> int:
        digest = hashlib.blake2b(token.casefold().encode("utf-8"), digest_size=8).digest()
        return RESERVED + int.from_bytes(digest, "big") % (self.vocab_size - RESERVED)

    def encode_text(self, text: str) -> list[int]:
        return [self.token_id(t) for t in _WORD_RE.findall(text)]

    def encode(self, item: ScorerInput, *, use_mentions=True, use_section=True) -> list[int]:
        ids = [CLS_ID]
        ids.extend(self.encode_text(item.target_title))
        if use_mentions and item.mentions:
            ids.extend(self.encode_text(" ".join(item.mentions[:10])))
        ids.append(SEP_ID)
        ids.extend(self.encode_text(item.target_lead))
        ids.append(SEP_ID)
        if use_section:
            ids.extend(self.encode_text(item.section_title))
            ids.append(SEP_ID)
        ids.extend(self.encode_text(item.candidate_text))
        ids.append(SEP_ID)
        return ids[: self.max_len]  # truncate from the right


def pad_batch(sequences: list[list[int]]) -> tuple[list[list[int]], list[list[bool]]]:
    """Pad to the longest sequence; mask marks PAD positions."""
    width = max(len(s) for s in sequences)
    padded, masks = [], []
    for seq in sequences:
        pad = width - len(seq)
        padded.append(seq + [PAD_ID] * pad)
        masks.append([False] * len(seq) + [True] * pad)
    return padded, masks
