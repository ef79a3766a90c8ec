"""End-to-end pipeline orchestration with content-hash stage caching.

A sectioned key-value config file declares stages, paths, seeds and knobs.
Stages run in dependency order; a stage is skipped when a previous manifest
records the same inputs and parameters and its outputs still hash to the
recorded values. The manifest stores relative paths and content hashes only,
so equal-seed runs produce byte-identical manifests wherever they run.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import sys
import time
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
from .errors import DataError, UsageError
from .evaluate import aggregate, score_rankings, write_report
from .ingest import ingest_articles, load_raw_article
from .rankers import Bm25Params, ExternalScorer, rank_example
from .records import read_records, write_records

ALL_STAGES = (
    "ingest_a",
    "ingest_b",
    "diff",
    "candidates_eval",
    "candidates_train",
    "augment",
    "rank",
    "eval",
    "stats",
)

MANIFEST_NAME = "run_manifest.json"


def log(stage: str, event: str, **fields) -> None:
    parts = [f"stage={stage}", f"event={event}"]
    parts.extend(f"{k}={v}" for k, v in fields.items())
    print(" ".join(parts), file=sys.stderr)


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class PipelineConfig:
    """Parsed run configuration; all paths resolved against the config dir."""

    def __init__(self, path, seed_override: int | None = None, workers: int | None = None):
        self.path = Path(path)
        if not self.path.exists():
            raise UsageError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        parser.read(self.path, encoding="utf-8")
        if "run" not in parser:
            raise UsageError("config missing [run] section")
        run = parser["run"]
        self.base = self.path.parent
        self.stages = run.get("stages", " ".join(ALL_STAGES)).split()
        unknown = [s for s in self.stages if s not in ALL_STAGES]
        if unknown:
            raise UsageError(f"unknown stages in config: {unknown}")
        self.seed = seed_override if seed_override is not None else run.getint("seed", 0)
        self.workers = workers if workers is not None else run.getint("workers", 1)
        self.out_dir = self.base / run.get("out", "out")

        snaps = parser["snapshots"] if "snapshots" in parser else {}
        self.snapshot_a_dir = self.base / snaps.get("a", "snapshots/a")
        self.snapshot_b_dir = self.base / snaps.get("b", "snapshots/b")
        self.label_a = snaps.get("label_a", "a")
        self.label_b = snaps.get("label_b", "b")

        diff = parser["diff"] if "diff" in parser else {}
        self.histories_dir = self.base / diff.get("histories", "histories")

        cand = parser["candidates"] if "candidates" in parser else {}
        self.window = int(cand.get("window", DEFAULT_WINDOW))
        self.negatives = int(cand.get("negatives", DEFAULT_NEGATIVES))

        aug = parser["augment"] if "augment" in parser else {}
        self.weights = RemovalWeights.parse(aug.get("weights", "0.4,0.2,0.3,0.1"))

        rank = parser["rank"] if "rank" in parser else {}
        self.methods = rank.get("methods", "random string_match bm25").split()
        self.scorer_cmd = rank.get("scorer_cmd", "") or None
        self.bm25 = Bm25Params(
            k1=float(rank.get("k1", 1.5)),
            b=float(rank.get("b", 0.75)),
        )

    def out(self, name: str) -> Path:
        return self.out_dir / name


def _snapshot_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.is_file())


def _ingest_stage(config: PipelineConfig, which: str) -> None:
    directory = config.snapshot_a_dir if which == "a" else config.snapshot_b_dir
    label = config.label_a if which == "a" else config.label_b
    raws = [
        load_raw_article(path.read_text(encoding="utf-8"), snapshot=label)
        for path in _snapshot_files(directory)
    ]
    articles, links, counts = ingest_articles(raws, workers=config.workers)
    write_records(config.out(f"{which}.articles.ndjson"), "article", articles)
    write_records(config.out(f"{which}.links.ndjson"), "link", links)
    log(
        f"ingest_{which}",
        "done",
        parsed=counts.parsed,
        admitted=counts.admitted,
        rejected_no_lead=counts.rejected_no_lead,
        rejected_missing_qid=counts.rejected_missing_qid,
        links=counts.links,
    )


def _diff_stage(config: PipelineConfig) -> None:
    links_a = list(read_records(config.out("a.links.ndjson"), "link"))
    links_b = list(read_records(config.out("b.links.ndjson"), "link"))
    events, counts = build_added_link_events(links_a, links_b, config.histories_dir)
    write_records(config.out("added.events.ndjson"), "event", events)
    log(
        "diff",
        "done",
        added_pairs=counts.added_pairs,
        events=counts.events,
        not_localizable=counts.not_localizable,
        missing_history=counts.missing_history,
    )


def _load_articles_by_qid(path) -> dict:
    return {record.qid: record for record in read_records(path, "article")}


def _candidates_eval_stage(config: PipelineConfig) -> None:
    events = list(read_records(config.out("added.events.ndjson"), "event"))
    articles = _load_articles_by_qid(config.out("a.articles.ndjson"))
    links_a = list(read_records(config.out("a.links.ndjson"), "link"))
    examples, side, counts = build_examples_from_events(
        events,
        articles,
        mode="eval",
        window=config.window,
        seed=config.seed,
        mention_sources=links_a,
    )
    write_records(config.out("eval.examples.ndjson"), "example", examples)
    write_records(config.out("side.events.ndjson"), "event", side)
    log(
        "candidates_eval",
        "done",
        examples=counts.examples,
        side_channel=counts.side_channel,
        gold_unresolvable=counts.gold_unresolvable,
    )


def _candidates_train_stage(config: PipelineConfig) -> None:
    articles = _load_articles_by_qid(config.out("a.articles.ndjson"))
    links_a = list(read_records(config.out("a.links.ndjson"), "link"))
    examples, counts = build_examples_from_links(
        links_a,
        articles,
        negatives=config.negatives,
        window=config.window,
        seed=config.seed,
    )
    write_records(config.out("train.examples.ndjson"), "example", examples)
    log(
        "candidates_train",
        "done",
        examples=counts.examples,
        gold_unresolvable=counts.gold_unresolvable,
    )


def _augment_stage(config: PipelineConfig) -> None:
    examples = read_records(config.out("train.examples.ndjson"), "example")
    augmented = augment_stream(examples, config.weights, config.seed)
    count = write_records(config.out("augmented.ndjson"), "augmented", augmented)
    log("augment", "done", examples=count)


def _rank_stage(config: PipelineConfig) -> None:
    examples = list(read_records(config.out("eval.examples.ndjson"), "example"))
    for method in config.methods:
        scorer = None
        try:
            if method == "external":
                if not config.scorer_cmd:
                    raise DataError("rank method 'external' requires scorer_cmd in [rank]")
                scorer = ExternalScorer(config.scorer_cmd)
                scorer.start()
            rankings = [
                rank_example(e, method, seed=config.seed, params=config.bm25, scorer=scorer)
                for e in examples
            ]
        finally:
            if scorer is not None:
                scorer.close()
        write_records(config.out(f"rankings.{method}.ndjson"), "ranking", rankings)
        log("rank", "done", method=method, rankings=len(rankings))


def _eval_stage(config: PipelineConfig) -> None:
    examples = list(read_records(config.out("eval.examples.ndjson"), "example"))
    for method in config.methods:
        rankings = list(read_records(config.out(f"rankings.{method}.ndjson"), "ranking"))
        report = aggregate(score_rankings(examples, rankings))
        write_report(config.out(f"report.{method}.ndjson"), report, method=method)
        log("eval", "done", method=method, examples=len(rankings))


def _stats_stage(config: PipelineConfig) -> None:
    report = stats_mod.stats_report(config.out("added.events.ndjson"))
    stats_mod.write_stats(config.out("stats.ndjson"), report)
    log("stats", "done")


def _stage_spec(config: PipelineConfig, name: str):
    """(inputs, outputs, params, runner) for one stage; paths are Path lists."""
    out = config.out
    if name in ("ingest_a", "ingest_b"):
        which = name[-1]
        directory = config.snapshot_a_dir if which == "a" else config.snapshot_b_dir
        label = config.label_a if which == "a" else config.label_b
        return (
            _snapshot_files(directory),
            [out(f"{which}.articles.ndjson"), out(f"{which}.links.ndjson")],
            {"snapshot": label},
            lambda: _ingest_stage(config, which),
        )
    if name == "diff":
        histories = sorted(config.histories_dir.glob("*.history"))
        return (
            [out("a.links.ndjson"), out("b.links.ndjson"), *histories],
            [out("added.events.ndjson")],
            {},
            lambda: _diff_stage(config),
        )
    if name == "candidates_eval":
        return (
            [out("added.events.ndjson"), out("a.articles.ndjson"), out("a.links.ndjson")],
            [out("eval.examples.ndjson"), out("side.events.ndjson")],
            {"window": config.window, "seed": config.seed},
            lambda: _candidates_eval_stage(config),
        )
    if name == "candidates_train":
        return (
            [out("a.articles.ndjson"), out("a.links.ndjson")],
            [out("train.examples.ndjson")],
            {"window": config.window, "negatives": config.negatives, "seed": config.seed},
            lambda: _candidates_train_stage(config),
        )
    if name == "augment":
        return (
            [out("train.examples.ndjson")],
            [out("augmented.ndjson")],
            {"weights": list(config.weights.as_tuple()), "seed": config.seed},
            lambda: _augment_stage(config),
        )
    if name == "rank":
        return (
            [out("eval.examples.ndjson")],
            [out(f"rankings.{m}.ndjson") for m in config.methods],
            {"methods": config.methods, "seed": config.seed,
             "k1": config.bm25.k1, "b": config.bm25.b},
            lambda: _rank_stage(config),
        )
    if name == "eval":
        return (
            [out("eval.examples.ndjson"), *(out(f"rankings.{m}.ndjson") for m in config.methods)],
            [out(f"report.{m}.ndjson") for m in config.methods],
            {"methods": config.methods},
            lambda: _eval_stage(config),
        )
    if name == "stats":
        return (
            [out("added.events.ndjson")],
            [out("stats.ndjson")],
            {},
            lambda: _stats_stage(config),
        )
    raise UsageError(f"unknown stage {name!r}")


def _relpath(path: Path, config: PipelineConfig) -> str:
    for base in (config.out_dir, config.base):
        try:
            return path.relative_to(base).as_posix()
        except ValueError:
            continue
    return path.name


def run_pipeline(config: PipelineConfig, *, force: bool = False) -> dict:
    """Execute the configured stages; returns the manifest dict."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    for name in config.stages:
        if name in ("ingest_a", "ingest_b"):
            directory = config.snapshot_a_dir if name.endswith("a") else config.snapshot_b_dir
            if not directory.is_dir():
                raise DataError(f"missing input: snapshot directory {directory}")
        if name == "diff" and not config.histories_dir.is_dir():
            raise DataError(f"missing input: histories directory {config.histories_dir}")

    manifest_path = config.out(MANIFEST_NAME)
    previous = {}
    if manifest_path.exists() and not force:
        try:
            with open(manifest_path, "r", encoding="utf-8") as fh:
                previous = {s["name"]: s for s in json.load(fh).get("stages", [])}
        except (json.JSONDecodeError, KeyError, TypeError):
            previous = {}

    manifest_stages = []
    for name in config.stages:
        inputs, outputs, params, runner = _stage_spec(config, name)
        input_hashes = {
            _relpath(p, config): _sha256_file(p) for p in inputs if p.exists()
        }
        missing_inputs = [str(p) for p in inputs if not p.exists()]
        if missing_inputs:
            raise DataError(f"stage {name}: missing inputs {missing_inputs}")
        params = dict(sorted(params.items()))
        cached = False
        prev = previous.get(name)
        if (
            prev
            and not force
            and prev.get("inputs") == input_hashes
            and prev.get("params") == params
            and all(p.exists() for p in outputs)
        ):
            current_outputs = {_relpath(p, config): _sha256_file(p) for p in outputs}
            if current_outputs == prev.get("outputs"):
                cached = True
        if cached:
            log(name, "cached")
            output_hashes = prev["outputs"]
        else:
            started = time.monotonic()
            try:
                runner()
            except Exception:
                log(name, "failed")  # partial outputs stay on disk
                raise
            log(name, "timing", seconds=f"{time.monotonic() - started:.3f}")
            output_hashes = {_relpath(p, config): _sha256_file(p) for p in outputs}
        manifest_stages.append(
            {
                "name": name,
                "params": params,
                "inputs": input_hashes,
                "outputs": output_hashes,
                "cached": cached,
            }
        )

    manifest = {
        "schema": "linkforge/v1",
        "kind": "manifest",
        "seed": config.seed,
        "stages": manifest_stages,
    }
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest
