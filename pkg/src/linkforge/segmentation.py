"""Rule-based sentence segmentation with per-language abbreviation tables.

Splitting rules, applied left to right:

1. A newline always terminates the current sentence (paragraph boundary).
2. Space-delimited scripts: a run of terminal punctuation (``.``, ``!``, ``?``
   and script equivalents) followed by whitespace splits when the next
   non-space character is an uppercase letter, a digit, or a caseless letter
   (scripts without case). A run that is a single ``.`` does not split when
   the word ending at it is a known abbreviation.
3. CJK languages: a run of 。！？ terminators always ends a sentence.
4. Fallback: text with no split point is a single sentence.

Returned spans cover all non-whitespace content and carry (start, end)
offsets into the input, so concatenating sentence texts with the gaps between
them reproduces the input byte-exactly.
"""
from __future__ import annotations

import json
from importlib import resources

TERMINALS = ".!?…؟۔।։"
CJK_TERMINALS = "。！？"
CJK_LANGS = {"ja", "zh", "lzh", "wuu", "yue"}

_abbrev_cache: dict[str, frozenset[str]] = {}


def _load_tables() -> dict:
    with resources.files("linkforge.data").joinpath("abbreviations.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


def abbreviations_for(lang: str) -> frozenset[str]:
    if lang not in _abbrev_cache:
        tables = _load_tables()
        merged = set(tables.get("default", ())) | set(tables.get(lang, ()))
        _abbrev_cache[lang] = frozenset(merged)
    return _abbrev_cache[lang]


def _is_cjk_lang(lang: str) -> bool:
    return lang.split("-")[0] in CJK_LANGS


def _starts_sentence(ch: str) -> bool:
    # Uppercase, digit, or a caseless letter (Devanagari, Arabic, CJK, ...).
    return ch.isdigit() or ch.isupper() or (ch.isalpha() and not ch.islower())


def _trailing_token(text: str, end: int) -> str:
    """The whitespace-delimited token ending at `end` (exclusive)."""
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end]


def segment_sentences(
    text: str,
    lang: str = "en",
    abbreviations: frozenset[str] | None = None,
) -> list[tuple[str, int, int]]:
    """Segment `text` into (sentence, start, end) triples."""
    if not text.strip():
        return []
    if abbreviations is None:
        abbreviations = abbreviations_for(lang)
    cjk = _is_cjk_lang(lang)
    terminals = CJK_TERMINALS if cjk else TERMINALS

    breaks = []  # positions where the next sentence starts
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            breaks.append(i + 1)
            i += 1
            continue
        if ch in terminals:
            run_start = i
            while i < n and text[i] in terminals:
                i += 1
            run = text[run_start:i]
            if cjk:
                breaks.append(i)
                continue
            if i < n and text[i].isspace():
                k = i
                while k < n and text[k].isspace():
                    k += 1
                if k < n and _starts_sentence(text[k]):
                    if run == "." and _trailing_token(text, run_start + 1) in abbreviations:
                        continue
                    breaks.append(k)
            continue
        i += 1

    spans: list[tuple[str, int, int]] = []
    seg_start = 0
    for brk in breaks + [n]:
        raw = text[seg_start:brk]
        stripped = raw.strip()
        if stripped:
            lead_ws = len(raw) - len(raw.lstrip())
            start = seg_start + lead_ws
            end = start + len(stripped)
            spans.append((stripped, start, end))
        seg_start = brk
    return spans
