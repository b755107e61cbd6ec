"""Command-line front end.

Subcommands:
  score      rank features and write ranking.csv
  schedule   dry-run: write every subset key the search would evaluate
  search     run the full search, write report.csv, persist the ledger
  ga         run the genetic-algorithm baseline, write history + report
  report     re-render an existing ledger into report.csv

Configuration is a JSON file (see configs/ for dataset presets); relative
paths inside it resolve against the config file's directory. An existing
ledger file is always honored: subsets it already records are never
retrained, which is what makes runs resumable and reruns idempotent.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .data import ingest, load_schema, split
from .evaluator import EvalRecord, TrainConfig, make_evaluator
from .ga import GAConfig, ga_select
from .scoring import RankedFeatures, rank_features
from .search import Ledger, SearchParams, rank_records, run_neshfs

log = logging.getLogger("neshfs")

REPORT_HEADER = "n_features,n_numerical,n_categorical,auc,logloss,time_s,tag,rank"


@dataclass(frozen=True)
class RunConfig:
    dataset: Path
    schema: Path
    sample_n: int | None
    seed: int
    split_ratios: tuple[float, float, float]
    search: SearchParams
    train: TrainConfig
    ga: GAConfig
    workers: int
    output_dir: Path
    ledger_path: Path


def load_config(path: str | Path, seed: int | None = None,
                workers: int | None = None,
                output_dir: str | None = None) -> RunConfig:
    """Parse the run configuration, applying CLI overrides."""
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent

    def resolve(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    run_seed = seed if seed is not None else int(raw.get("seed", 0))
    train_raw = dict(raw.get("train", {}))
    train_raw.setdefault("seed", run_seed)
    ga_raw = dict(raw.get("ga", {}))
    ga_raw.setdefault("seed", run_seed)
    out = Path(output_dir) if output_dir is not None else resolve(
        raw.get("output_dir", "out"))
    ledger_path = (resolve(raw["ledger"]) if "ledger" in raw
                   else out / "ledger.jsonl")
    cfg = RunConfig(
        dataset=resolve(raw["dataset"]),
        schema=resolve(raw["schema"]),
        sample_n=raw.get("sample_n"),
        seed=run_seed,
        split_ratios=tuple(raw.get("split", (0.8, 0.1, 0.1))),
        search=SearchParams(**raw.get("search", {})),
        train=TrainConfig(**train_raw),
        ga=GAConfig(**ga_raw),
        workers=workers if workers is not None else int(raw.get("workers", 1)),
        output_dir=out,
        ledger_path=ledger_path,
    )
    if cfg.workers < 1:
        raise ValueError("workers must be >= 1")
    return cfg


def _prepare(config: RunConfig):
    schema = load_schema(config.schema)
    dataset = ingest(config.dataset, schema, sample_n=config.sample_n,
                     seed=config.seed)
    dataset = split(dataset, config.split_ratios, seed=config.seed)
    return schema, dataset, rank_features(dataset)


def write_ranking(ranked: RankedFeatures, path: Path) -> None:
    lines = ["kind,rank,feature,score"]
    for group in (ranked.numerical, ranked.categorical):
        lines.extend(f"{f.kind},{f.rank},{f.name},{f.score}" for f in group)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report(records: list[EvalRecord], path: Path) -> None:
    """Ledger entries in insertion order; rank 1 marks the highest AUC."""
    ranking = {id(r): pos + 1 for pos, r in enumerate(rank_records(records))}
    lines = [REPORT_HEADER]
    for r in records:
        lines.append(
            f"{r.n_features},{r.n_numerical},{r.n_categorical},"
            f"{r.auc},{r.logloss},{r.train_time_s:.3f},{r.tag},{ranking[id(r)]}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_history(history: list[float], path: Path) -> None:
    lines = ["generation,best_auc"]
    lines.extend(f"{gen},{fit}" for gen, fit in enumerate(history, start=1))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _describe(record: EvalRecord) -> str:
    return (f"{record.n_features} features "
            f"({record.n_numerical} numerical, {record.n_categorical} "
            f"categorical) auc={record.auc:.5f} logloss={record.logloss:.5f}")


def cmd_score(config: RunConfig) -> int:
    _, _, ranked = _prepare(config)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    out = config.output_dir / "ranking.csv"
    write_ranking(ranked, out)
    print(f"wrote {out}")
    return 0


def cmd_schedule(config: RunConfig) -> int:
    """Pre-derive every key the configured run would evaluate, without
    training: a stub evaluator hands out strictly decreasing AUCs so top-k
    selection picks the first k general-search subsets."""
    _, _, ranked = _prepare(config)
    counter = iter(range(10 ** 9))

    def stub(subset) -> EvalRecord:
        return EvalRecord(subset_key="", n_numerical=0, n_categorical=0,
                          kept_numerical=(), kept_categorical=(),
                          auc=1.0 - next(counter) * 1e-9, logloss=0.0,
                          train_time_s=0.0, epochs_run=0)

    _, ledger = run_neshfs(ranked, config.search, stub)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    out = config.output_dir / "schedule.txt"
    out.write_text("".join(key + "\n" for key in ledger.entries),
                   encoding="utf-8")
    print(f"wrote {out} ({len(ledger)} subsets)")
    return 0


def cmd_search(config: RunConfig) -> int:
    _, dataset, ranked = _prepare(config)
    ledger = Ledger.load(config.ledger_path)
    known = len(ledger)
    if known:
        log.info("resuming: ledger already holds %d evaluations", known)
    evaluator = make_evaluator(dataset, config.train)
    best, ledger = run_neshfs(ranked, config.search, evaluator,
                              ledger=ledger, workers=config.workers)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    report = config.output_dir / "report.csv"
    write_report(ledger.records(), report)
    best_record = ledger.get(best.key)
    print(f"evaluated {len(ledger) - known} new subsets "
          f"({len(ledger.failures)} failures)")
    print(f"best subset: {_describe(best_record)}")
    print(f"kept: {', '.join(best.kept_numerical + best.kept_categorical)}")
    print(f"wrote {report}")
    return 0


def cmd_ga(config: RunConfig) -> int:
    _, dataset, ranked = _prepare(config)
    ledger = Ledger.load(config.ledger_path)
    known = len(ledger)
    evaluator = make_evaluator(dataset, config.train)
    best, history = ga_select(ranked, config.ga, evaluator, ledger=ledger)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    report = config.output_dir / "report.csv"
    history_path = config.output_dir / "ga_history.csv"
    write_report(ledger.records(), report)
    write_history(history, history_path)
    print(f"evaluated {len(ledger) - known} new subsets "
          f"({len(ledger.failures)} failures)")
    print(f"best subset: {_describe(best)}")
    print(f"wrote {report} and {history_path}")
    return 0


def cmd_report(config: RunConfig) -> int:
    ledger = Ledger.load(config.ledger_path)
    if not len(ledger):
        print(f"ledger {config.ledger_path} is empty or missing",
              file=sys.stderr)
        return 1
    config.output_dir.mkdir(parents=True, exist_ok=True)
    report = config.output_dir / "report.csv"
    write_report(ledger.records(), report)
    print(f"wrote {report} ({len(ledger)} rows)")
    return 0


COMMANDS = {
    "score": cmd_score,
    "schedule": cmd_schedule,
    "search": cmd_search,
    "ga": cmd_ga,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neshfs",
        description="Feature-subset search for CTR models: score-ranked "
                    "removal plus up/down neighborhood refinement.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--workers", type=int, default=None,
                       help="override the worker count")
        p.add_argument("--output", default=None,
                       help="override the output directory")
        p.add_argument("--resume", action="store_true",
                       help="reuse an existing ledger (existing ledgers are "
                            "always honored; this flag just makes it explicit)")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed,
                             workers=args.workers, output_dir=args.output)
        return COMMANDS[args.command](config)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
