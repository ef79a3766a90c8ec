"""Corpus statistics: insertion-scenario frequencies and candidate-count CCDF."""
from __future__ import annotations

import json
from collections import Counter, defaultdict

from .errors import DataError
from .records import file_kind, read_records


def scenario_frequencies(tagged) -> dict[str, dict[str, float]]:
    """Per-language relative frequency of each insertion scenario.

    Accepts anything carrying .lang and .scenario (events or examples).
    """
    counts: dict[str, Counter] = defaultdict(Counter)
    for item in tagged:
        lang = item.link.lang if hasattr(item, "link") else item.lang
        counts[lang][item.scenario.value] += 1
    out = {}
    for lang, counter in counts.items():
        total = sum(counter.values())
        out[lang] = {scenario: c / total for scenario, c in sorted(counter.items())}
    return out


def ccdf_value(values, x) -> float:
    """Fraction of values strictly greater than x."""
    values = list(values)
    if not values:
        return 0.0
    return sum(1 for v in values if v > x) / len(values)


def ccdf_table(values) -> list[tuple[int, float]]:
    """Two-column CCDF table evaluated at 0..max(values)."""
    values = list(values)
    if not values:
        return []
    return [(x, ccdf_value(values, x)) for x in range(0, max(values) + 1)]


def candidate_counts(path) -> list[int]:
    """Candidate sentences per article, from an articles or examples file."""
    kind = file_kind(path)
    if kind == "article":
        return [record.sentence_count for record in read_records(path, "article")]
    if kind == "example":
        per_article: dict[str, int] = {}
        for example in read_records(path, "example"):
            gold = example.gold
            per_article.setdefault(gold.article_id, len(example.candidates))
        return [per_article[k] for k in sorted(per_article)]
    raise DataError(f"cannot derive candidate counts from a {kind!r} file")


def stats_report(path) -> dict:
    """Statistics for one corpus file, keyed by what the file supports."""
    kind = file_kind(path)
    report: dict = {"input_kind": kind}
    if kind in ("event", "example"):
        records = list(read_records(path, kind))
        report["scenario_frequencies"] = scenario_frequencies(records)
        if kind == "example":
            per_article: dict[str, int] = {}
            for example in records:
                per_article.setdefault(example.gold.article_id, len(example.candidates))
            report["candidate_ccdf"] = ccdf_table(list(per_article.values()))
    elif kind == "article":
        counts = [record.sentence_count for record in read_records(path, "article")]
        report["candidate_ccdf"] = ccdf_table(counts)
    elif kind == "link":
        langs = Counter(link.lang for link in read_records(path, "link"))
        report["links_per_language"] = dict(sorted(langs.items()))
    else:
        raise DataError(f"no statistics defined for kind {kind!r}")
    return report


def format_stats(report: dict) -> str:
    lines = [f"input_kind: {report['input_kind']}"]
    freqs = report.get("scenario_frequencies")
    if freqs is not None:
        lines.append("scenario frequencies:")
        for lang, table in sorted(freqs.items()):
            for scenario, value in sorted(table.items()):
                lines.append(f"  {lang:<8} {scenario:<18} {value:.6f}")
    ccdf = report.get("candidate_ccdf")
    if ccdf is not None:
        lines.append("candidate-count CCDF:")
        lines.append(f"  {'d':>6} {'P(D>d)':>10}")
        for x, value in ccdf:
            lines.append(f"  {x:>6} {value:>10.6f}")
    links = report.get("links_per_language")
    if links is not None:
        lines.append("links per language:")
        for lang, count in links.items():
            lines.append(f"  {lang:<8} {count}")
    return "\n".join(lines)


def write_stats(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"kind": "stats", "schema": "linkforge/v1"},
                            ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n")
        fh.write(json.dumps(report, ensure_ascii=False, sort_keys=True,
                            separators=(",", ":")) + "\n")
