"""linkforge command line: ingest, diff, candidates, augment, rank, eval,
stats, run.

Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer-protocol error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import stats as stats_mod
from .augment import RemovalWeights, augment_stream
from .candidates import (
    DEFAULT_NEGATIVES,
    DEFAULT_WINDOW,
    build_examples_from_events,
    build_examples_from_links,
)
from .diffing import build_added_link_events
from .errors import LinkforgeError, ScorerProtocolError, UsageError
from .evaluate import aggregate, bucket_significance, score_rankings, write_report
from .ingest import ingest_articles, load_raw_article
from .pipeline import PipelineConfig, log, run_pipeline
from .rankers import METHODS, Bm25Params, ExternalScorer, rank_example
from .records import read_records, write_records

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SCORER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_global_flags(parser, suppress=False):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="global RNG seed")
    parser.add_argument(
        "--workers", type=int, default=argparse.SUPPRESS if suppress else 1,
        help="worker count for ingest",
    )
    parser.add_argument("--config", default=default, help="pipeline config file (run)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="linkforge", description=__doc__)
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse article markup, extract links")
    p.add_argument("--snapshot", required=True, help="snapshot label")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of article files")
    p.add_argument("--out", required=True, help="output .articles.ndjson")
    p.add_argument("--links", required=True, help="output .links.ndjson")

    p = sub.add_parser("diff", help="diff snapshots, localize and classify added links")
    p.add_argument("--snap-a", required=True)
    p.add_argument("--snap-b", required=True)
    p.add_argument("--histories", required=True, help="directory of <qid>.history files")
    p.add_argument("--out", required=True, help="output .events.ndjson")

    p = sub.add_parser("candidates", help="build ranking examples")
    p.add_argument("--events", default=None, help="input .events.ndjson (added links)")
    p.add_argument("--links", default=None, help="input .links.ndjson (existing links)")
    p.add_argument("--articles", required=True, help="before-version .articles.ndjson")
    p.add_argument("--mode", choices=("train", "eval"), default="eval")
    p.add_argument("--negatives", type=int, default=DEFAULT_NEGATIVES)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--out", required=True, help="output .examples.ndjson")
    p.add_argument("--side-out", default=None, help="missing_section side channel output")
    p.add_argument("--mention-links", default=None, help="extra links for the mention inventory")

    p = sub.add_parser("augment", help="apply dynamic context removal")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--weights", default="0.4,0.2,0.3,0.1", help="rm_nth,rm_mention,rm_sent,rm_span")
    p.add_argument("--out", required=True)

    p = sub.add_parser("rank", help="rank candidates with a baseline or external scorer")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--scorer-cmd", default=None, help="command for --method external")
    p.add_argument("--scorer-timeout", type=float, default=60.0)
    p.add_argument("--k1", type=float, default=1.5)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--stop-list", default=None,
                   help="file of stop words (one per line) excluded from BM25 keywords")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="compute Hits@1/MRR report")
    p.add_argument("--rankings", required=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("table", "ndjson"), default="ndjson")
    p.add_argument("--hits-k", type=int, default=None, help="additional Hits@k column")
    p.add_argument("--compare", default=None,
                   help="second rankings file; adds paired-bootstrap significance rows")
    p.add_argument("--bootstrap-iterations", type=int, default=10_000)

    p = sub.add_parser("stats", help="corpus statistics report")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", default=None, help="write ndjson report here (default stdout)")

    p = sub.add_parser("run", help="run the configured pipeline end to end")
    p.add_argument("--force", action="store_true", help="ignore cached stage results")

    for sub_parser in sub.choices.values():
        _add_global_flags(sub_parser, suppress=True)

    return parser


def _cmd_ingest(args) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise UsageError(f"not a directory: {in_dir}")
    raws = [
        load_raw_article(path.read_text(encoding="utf-8"), snapshot=args.snapshot)
        for path in sorted(p for p in in_dir.iterdir() if p.is_file())
    ]
    articles, links, counts = ingest_articles(raws, workers=args.workers)
    write_records(args.out, "article", articles)
    write_records(args.links, "link", links)
    log(
        "ingest",
        "done",
        parsed=counts.parsed,
        admitted=counts.admitted,
        rejected_no_lead=counts.rejected_no_lead,
        rejected_missing_qid=counts.rejected_missing_qid,
        empty_anchors=counts.empty_anchors,
        links=counts.links,
    )
    return EXIT_OK


def _cmd_diff(args) -> int:
    links_a = list(read_records(args.snap_a, "link"))
    links_b = list(read_records(args.snap_b, "link"))
    events, counts = build_added_link_events(links_a, links_b, args.histories)
    write_records(args.out, "event", events)
    log(
        "diff",
        "done",
        added_pairs=counts.added_pairs,
        events=counts.events,
        not_localizable=counts.not_localizable,
        missing_history=counts.missing_history,
    )
    return EXIT_OK


def _cmd_candidates(args, seed: int) -> int:
    if bool(args.events) == bool(args.links):
        raise UsageError("provide exactly one of --events or --links")
    articles = {r.qid: r for r in read_records(args.articles, "article")}
    if args.events:
        events = list(read_records(args.events, "event"))
        mention_sources = (
            list(read_records(args.mention_links, "link")) if args.mention_links else None
        )
        examples, side, counts = build_examples_from_events(
            events,
            articles,
            mode=args.mode,
            negatives=args.negatives,
            window=args.window,
            seed=seed,
            mention_sources=mention_sources,
        )
        if args.side_out:
            write_records(args.side_out, "event", side)
        log(
            "candidates",
            "done",
            examples=counts.examples,
            side_channel=counts.side_channel,
            gold_unresolvable=counts.gold_unresolvable,
        )
    else:
        links = list(read_records(args.links, "link"))
        examples, counts = build_examples_from_links(
            links, articles, negatives=args.negatives, window=args.window, seed=seed
        )
        log(
            "candidates",
            "done",
            examples=counts.examples,
            gold_unresolvable=counts.gold_unresolvable,
        )
    write_records(args.out, "example", examples)
    return EXIT_OK


def _cmd_augment(args, seed: int) -> int:
    weights = RemovalWeights.parse(args.weights)
    examples = read_records(args.in_path, "example")
    count = write_records(args.out, "augmented", augment_stream(examples, weights, seed))
    log("augment", "done", examples=count)
    return EXIT_OK


def _cmd_rank(args, seed: int) -> int:
    if args.method == "external" and not args.scorer_cmd:
        raise UsageError("--method external requires --scorer-cmd")
    examples = list(read_records(args.in_path, "example"))
    params = Bm25Params(k1=args.k1, b=args.b)
    stop_words = frozenset()
    if args.stop_list:
        stop_words = frozenset(
            line.strip().casefold()
            for line in Path(args.stop_list).read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
    scorer = None
    failed = 0
    rankings = []
    try:
        if args.method == "external":
            scorer = ExternalScorer(args.scorer_cmd, timeout=args.scorer_timeout)
            scorer.start()
        for example in examples:
            try:
                rankings.append(
                    rank_example(example, args.method, seed=seed, params=params,
                                 scorer=scorer, stop_words=stop_words)
                )
            except ScorerProtocolError as exc:
                if "timed out" in str(exc):
                    failed += 1
                    log("rank", "example_failed", example_id=example.example_id, error=str(exc))
                    continue
                raise
    finally:
        if scorer is not None:
            scorer.close()
    write_records(args.out, "ranking", rankings)
    log("rank", "done", method=args.method, rankings=len(rankings), failed=failed)
    return EXIT_SCORER if failed else EXIT_OK


def _cmd_eval(args, seed: int) -> int:
    examples = list(read_records(args.examples, "example"))
    rankings = list(read_records(args.rankings, "ranking"))
    results = score_rankings(examples, rankings, extra_k=args.hits_k)
    report = aggregate(results)
    significance = None
    if args.compare:
        other = list(read_records(args.compare, "ranking"))
        results_b = score_rankings(examples, other, extra_k=args.hits_k)
        significance = bucket_significance(
            results, results_b, iterations=args.bootstrap_iterations, seed=seed
        )
    write_report(args.out, report, significance=significance)
    if args.format == "table":
        print(report.format_table())
        for row in significance or []:
            print(
                f"significance[{row['bucket']}/{row['metric']}] vs compare: "
                f"p={row['p_value']:.4f}"
            )
    log("eval", "done", examples=len(results))
    return EXIT_OK


def _cmd_stats(args) -> int:
    report = stats_mod.stats_report(args.in_path)
    if args.out:
        stats_mod.write_stats(args.out, report)
    else:
        print(stats_mod.format_stats(report))
    log("stats", "done")
    return EXIT_OK


def _cmd_run(args, seed: int | None, workers: int | None) -> int:
    if not args.config:
        raise UsageError("run requires --config")
    config = PipelineConfig(args.config, seed_override=seed, workers=workers)
    run_pipeline(config, force=args.force)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        seed = args.seed if args.seed is not None else 0
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "diff":
            return _cmd_diff(args)
        if args.command == "candidates":
            return _cmd_candidates(args, seed)
        if args.command == "augment":
            return _cmd_augment(args, seed)
        if args.command == "rank":
            return _cmd_rank(args, seed)
        if args.command == "eval":
            return _cmd_eval(args, seed)
        if args.command == "stats":
            return _cmd_stats(args)
        if args.command == "run":
            return _cmd_run(args, args.seed, args.workers)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"linkforge: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScorerProtocolError as exc:
        print(f"linkforge: scorer protocol error: {exc}", file=sys.stderr)
        return EXIT_SCORER
    except (LinkforgeError, OSError) as exc:
        print(f"linkforge: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
