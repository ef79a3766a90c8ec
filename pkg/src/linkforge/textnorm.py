"""Text normalization, tokenization and mention matching.

One canonical tokenizer is shared by the diff classifier, the BM25 ranker and
the mention-containment matcher so that filtering decisions agree everywhere.
"""
from __future__ import annotations

import hashlib
import re
import unicodedata

_WORD_RE = re.compile(r"\w+", re.UNICODE)

# Han, kana, hangul and CJK compatibility blocks: scripts without word spacing.
_CJK_RANGES = (
    (0x2E80, 0x303E),
    (0x3041, 0x30FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),
    (0xF900, 0xFAFF),
    (0xFF66, 0xFF9D),
)


def normalize(text: str) -> str:
    """NFKC-normalize and case-fold; the basis for all fuzzy matching."""
    return unicodedata.normalize("NFKC", text).casefold()


def tokenize(text: str) -> list[str]:
    """Case-folded word tokens of the normalized text."""
    return _WORD_RE.findall(normalize(text))


def has_cjk(text: str) -> bool:
    return any(lo <= ord(ch) <= hi for ch in text for lo, hi in _CJK_RANGES)


def contains_mention(text: str, mention: str) -> bool:
    """True if `mention` occurs in `text` under the declared normalization.

    Word-boundary match for space-delimited scripts, plain substring match for
    CJK mentions (no word boundaries to anchor on).
    """
    m = normalize(mention)
    if not m:
        return False
    t = normalize(text)
    if has_cjk(m):
        return m in t
    return re.search(r"(?<!\w)" + re.escape(m) + r"(?!\w)", t) is not None


def contains_any_mention(text: str, mentions) -> bool:
    return any(contains_mention(text, m) for m in mentions)


def jaccard(tokens_a, tokens_b) -> float:
    """Token-set Jaccard similarity; 0.0 when both sides are empty."""
    a, b = set(tokens_a), set(tokens_b)
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def stable_hash64(text: str) -> int:
    """Platform-independent 64-bit hash (used to derive per-item RNG seeds)."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def article_id_for(lang: str, title: str, snapshot: str) -> str:
    """Stable fixed-width id for one article version."""
    key = "\x1f".join((lang, title, snapshot)).encode("utf-8")
    return hashlib.sha256(key).hexdigest()[:16]
