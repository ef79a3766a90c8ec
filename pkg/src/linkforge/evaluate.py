"""Hits@k / MRR computation, category breakdowns and paired significance.

Examples are bucketed into Overall, Present (text_present) and Missing
(missing_mention + missing_sentence + missing_span); missing_section is
excluded from every bucket. Micro means are per language; the macro row is
the unweighted mean of per-language micro values. Significance is a
two-sided paired bootstrap over examples.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .records import (
    MISSING_SCENARIOS,
    InsertionScenario,
    Ranking,
    RankingExample,
)

BUCKETS = ("overall", "present", "missing")
MACRO_LANG = "macro"
POOLED_LANG = "all"


def hits_at_k(ranking: Ranking, gold_index: int, k: int) -> int:
    """1 iff the gold candidate appears among the top k."""
    if not 0 <= gold_index < len(ranking.order):
        raise DataError(f"gold_index {gold_index} out of range for D={len(ranking.order)}")
    if not 1 <= k <= len(ranking.order):
        raise DataError(f"k={k} out of range for D={len(ranking.order)}")
    return 1 if gold_index in ranking.order[:k] else 0


def mrr(ranking: Ranking, gold_index: int) -> float:
    """Reciprocal of the gold candidate's 1-based rank."""
    if not 0 <= gold_index < len(ranking.order):
        raise DataError(f"gold_index {gold_index} out of range for D={len(ranking.order)}")
    return 1.0 / ranking.rank_of(gold_index)


@dataclass(frozen=True)
class ExampleResult:
    example_id: str
    lang: str
    scenario: InsertionScenario
    hits1: int
    reciprocal_rank: float
    hits_k: int | None = None


def score_rankings(
    examples: list[RankingExample],
    rankings: list[Ranking],
    *,
    extra_k: int | None = None,
) -> list[ExampleResult]:
    """Join rankings to examples by example_id and compute per-example metrics."""
    by_id = {r.example_id: r for r in rankings}
    results = []
    for example in examples:
        ranking = by_id.get(example.example_id)
        if ranking is None:
            continue
        if len(ranking.scores) != len(example.candidates):
            raise DataError(
                f"ranking for {example.example_id} scores {len(ranking.scores)} candidates, "
                f"example has {len(example.candidates)}"
            )
        hk = None
        if extra_k is not None:
            hk = hits_at_k(ranking, example.gold_index, min(extra_k, len(ranking.order)))
        results.append(
            ExampleResult(
                example_id=example.example_id,
                lang=example.lang,
                scenario=example.scenario,
                hits1=hits_at_k(ranking, example.gold_index, 1),
                reciprocal_rank=mrr(ranking, example.gold_index),
                hits_k=hk,
            )
        )
    return results


@dataclass(frozen=True)
class BucketStats:
    n: int
    hits1: float | None
    mrr: float | None
    hits_k: float | None = None


@dataclass(frozen=True)
class EvalReport:
    """Per-language micro rows plus pooled micro and unweighted macro rows."""

    rows: dict  # (lang, bucket) -> BucketStats
    languages: tuple[str, ...]

    def get(self, lang: str, bucket: str) -> BucketStats:
        return self.rows[(lang, bucket)]

    def to_rows(self):
        for (lang, bucket), stats in sorted(self.rows.items()):
            yield {
                "lang": lang,
                "bucket": bucket,
                "n": stats.n,
                "hits_at_1": stats.hits1,
                "mrr": stats.mrr,
                **({"hits_at_k": stats.hits_k} if stats.hits_k is not None else {}),
            }

    def format_table(self) -> str:
        def fmt(v):
            return "  --  " if v is None else f"{v:.4f}"

        lines = [
            f"{'lang':<10} {'n(O/P/M)':>14}  "
            f"{'Hits@1 Overall':>14} {'Present':>8} {'Missing':>8}  "
            f"{'MRR Overall':>11} {'Present':>8} {'Missing':>8}"
        ]
        for lang in list(self.languages) + [POOLED_LANG, MACRO_LANG]:
            o, p, m = (self.rows[(lang, b)] for b in BUCKETS)
            lines.append(
                f"{lang:<10} {f'{o.n}/{p.n}/{m.n}':>14}  "
                f"{fmt(o.hits1):>14} {fmt(p.hits1):>8} {fmt(m.hits1):>8}  "
                f"{fmt(o.mrr):>11} {fmt(p.mrr):>8} {fmt(m.mrr):>8}"
            )
        return "\n".join(lines)


def _bucket_of(scenario: InsertionScenario) -> str | None:
    if scenario is InsertionScenario.TEXT_PRESENT:
        return "present"
    if scenario in MISSING_SCENARIOS:
        return "missing"
    return None  # missing_section: excluded everywhere


def _stats(results: list[ExampleResult]) -> BucketStats:
    if not results:
        return BucketStats(n=0, hits1=None, mrr=None, hits_k=None)
    n = len(results)
    hk_values = [r.hits_k for r in results if r.hits_k is not None]
    return BucketStats(
        n=n,
        hits1=sum(r.hits1 for r in results) / n,
        mrr=sum(r.reciprocal_rank for r in results) / n,
        hits_k=(sum(hk_values) / n) if len(hk_values) == n else None,
    )


def aggregate(results: list[ExampleResult]) -> EvalReport:
    """Bucketed micro means per language plus pooled micro and macro rows."""
    for r in results:
        if not isinstance(r.scenario, InsertionScenario):
            raise DataError(f"unknown scenario tag {r.scenario!r}")
    kept = [r for r in results if _bucket_of(r.scenario) is not None]
    languages = tuple(sorted({r.lang for r in kept}))
    rows = {}
    per_bucket_micro: dict[str, list[BucketStats]] = {b: [] for b in BUCKETS}
    for lang in languages:
        lang_results = [r for r in kept if r.lang == lang]
        for bucket in BUCKETS:
            selected = (
                lang_results
                if bucket == "overall"
                else [r for r in lang_results if _bucket_of(r.scenario) == bucket]
            )
            stats = _stats(selected)
            rows[(lang, bucket)] = stats
            per_bucket_micro[bucket].append(stats)
    for bucket in BUCKETS:
        pooled = (
            kept if bucket == "overall" else [r for r in kept if _bucket_of(r.scenario) == bucket]
        )
        rows[(POOLED_LANG, bucket)] = _stats(pooled)
        with_data = [s for s in per_bucket_micro[bucket] if s.n > 0]
        if with_data:
            rows[(MACRO_LANG, bucket)] = BucketStats(
                n=sum(s.n for s in with_data),
                hits1=sum(s.hits1 for s in with_data) / len(with_data),
                mrr=sum(s.mrr for s in with_data) / len(with_data),
                hits_k=(
                    sum(s.hits_k for s in with_data) / len(with_data)
                    if all(s.hits_k is not None for s in with_data)
                    else None
                ),
            )
        else:
            rows[(MACRO_LANG, bucket)] = BucketStats(n=0, hits1=None, mrr=None, hits_k=None)
    return EvalReport(rows=rows, languages=languages)


def paired_significance(
    results_a: list[ExampleResult],
    results_b: list[ExampleResult],
    metric: str = "mrr",
    iterations: int = 10_000,
    seed: int = 0,
) -> float:
    """Two-sided paired bootstrap p-value for the metric difference a - b."""
    if metric not in ("mrr", "hits1"):
        raise DataError(f"metric must be 'mrr' or 'hits1', got {metric!r}")
    a_by_id = {r.example_id: r for r in results_a}
    b_by_id = {r.example_id: r for r in results_b}
    if set(a_by_id) != set(b_by_id):
        raise DataError("result sets are not aligned on example_ids")
    if not a_by_id:
        raise DataError("empty result sets")
    ids = sorted(a_by_id)

    def value(r):
        return r.reciprocal_rank if metric == "mrr" else float(r.hits1)

    diffs = np.array([value(a_by_id[i]) - value(b_by_id[i]) for i in ids], dtype=np.float64)
    observed = float(diffs.mean())
    if observed == 0.0:
        return 1.0
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(diffs)
    flips = 0
    chunk = 1000
    done = 0
    while done < iterations:
        batch = min(chunk, iterations - done)
        indices = rng.integers(0, n, size=(batch, n))
        means = diffs[indices].mean(axis=1)
        if observed > 0:
            flips += int((means <= 0.0).sum())
        else:
            flips += int((means >= 0.0).sum())
        done += batch
    return min(1.0, 2.0 * flips / iterations)


def bucket_significance(
    results_a: list[ExampleResult],
    results_b: list[ExampleResult],
    *,
    iterations: int = 10_000,
    seed: int = 0,
) -> list[dict]:
    """Per-bucket paired bootstrap annotations comparing two result sets."""
    annotations = []
    for bucket in BUCKETS:
        def keep(r):
            return bucket == "overall" or _bucket_of(r.scenario) == bucket

        sub_a = [r for r in results_a if _bucket_of(r.scenario) is not None and keep(r)]
        sub_b = [r for r in results_b if _bucket_of(r.scenario) is not None and keep(r)]
        if not sub_a or not sub_b:
            continue
        for metric in ("hits1", "mrr"):
            p = paired_significance(sub_a, sub_b, metric=metric, iterations=iterations, seed=seed)
            annotations.append(
                {"row": "significance", "bucket": bucket, "metric": metric,
                 "p_value": p, "significant_at_0.05": p < 0.05}
            )
    return annotations


def write_report(
    path,
    report: EvalReport,
    *,
    method: str | None = None,
    significance: list[dict] | None = None,
) -> None:
    """Emit the report as header + one ndjson row per (lang, bucket),
    plus optional significance annotation rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"kind": "report", "schema": "linkforge/v1"},
                            ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n")
        for row in report.to_rows():
            if method is not None:
                row = {"method": method, **row}
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True,
                                separators=(",", ":")) + "\n")
        for row in significance or []:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True,
                                separators=(",", ":")) + "\n")
