"""Score-ranked subset search: nested removal schedule, top-k selection,
and up/down neighborhood refinement over a deduplicating ledger.

Every subset the engine emits keeps the top-ranked prefix of each kind's
ranked list (removal always takes the lowest-scored kept feature), so the
search walks a small two-dimensional grid of prefix pairs and then probes
one-feature moves around the most promising cells.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .evaluator import EvalRecord
from .scoring import RankedFeatures

log = logging.getLogger(__name__)

KEY_SEPARATOR = "|"
GENERAL_TAGS = ("base", "general")

Evaluator = Callable[["FeatureSubset"], EvalRecord]


class SearchError(RuntimeError):
    """The search could not produce a best subset."""


@dataclass(frozen=True)
class SearchParams:
    """Step sizes and budgets for the search.

    i: categorical features removed per outer step
    j: numerical features removed per inner step
    u / d: iterations of up / down neighborhood search per start
    k: number of top subsets refined
    min_total: down-search stops once a subset is this small
    """

    i: int = 5
    j: int = 3
    u: int = 3
    d: int = 3
    k: int = 3
    min_total: int = 3

    def __post_init__(self):
        if self.j < 0 or self.u < 0 or self.d < 0 or self.k < 0:
            raise ValueError("j, u, d, and k must be >= 0")
        if self.min_total < 1:
            raise ValueError("min_total must be >= 1")


def canonical_key(kept_names: Iterable[str]) -> str:
    return KEY_SEPARATOR.join(sorted(kept_names))


@dataclass(frozen=True)
class FeatureSubset:
    """Kept and removed features of both kinds.

    Kept lists are score-descending; removed lists are in removal order
    (each removal takes the lowest-scored kept feature, so the last removed
    is the highest-scored of the removed).
    """

    kept_numerical: tuple[str, ...]
    kept_categorical: tuple[str, ...]
    removed_numerical: tuple[str, ...] = ()
    removed_categorical: tuple[str, ...] = ()

    @property
    def key(self) -> str:
        return canonical_key(self.kept_numerical + self.kept_categorical)

    @property
    def size(self) -> int:
        return len(self.kept_numerical) + len(self.kept_categorical)

    @property
    def counts(self) -> tuple[int, int]:
        return len(self.kept_numerical), len(self.kept_categorical)


def prefix_subset(ranked: RankedFeatures, n_num: int, n_cat: int) -> FeatureSubset:
    """Subset keeping the ``n_num`` / ``n_cat`` top-ranked features of each
    kind; the removed suffixes are ordered lowest score first."""
    num = ranked.numerical_names
    cat = ranked.categorical_names
    return FeatureSubset(
        kept_numerical=num[:n_num],
        kept_categorical=cat[:n_cat],
        removed_numerical=tuple(reversed(num[n_num:])),
        removed_categorical=tuple(reversed(cat[n_cat:])),
    )


def subset_from_kept(ranked: RankedFeatures, kept: Iterable[str]) -> FeatureSubset:
    """Subset for an arbitrary kept set (not necessarily a prefix); kept
    lists follow rank order, removed lists lowest score first."""
    kept = set(kept)
    num = ranked.numerical_names
    cat = ranked.categorical_names
    return FeatureSubset(
        kept_numerical=tuple(n for n in num if n in kept),
        kept_categorical=tuple(c for c in cat if c in kept),
        removed_numerical=tuple(n for n in reversed(num) if n not in kept),
        removed_categorical=tuple(c for c in reversed(cat) if c not in kept),
    )


class Ledger:
    """Insertion-ordered map of canonical subset key -> EvalRecord, with an
    optional append-only JSONL file behind it.

    A key is evaluated at most once per ledger, including across resumed
    runs that load the same file. Failed evaluations are remembered so the
    run does not retry them, but they are not persisted.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, EvalRecord] = {}
        self.failures: dict[str, str] = {}

    @classmethod
    def load(cls, path: str | Path) -> "Ledger":
        ledger = cls(path)
        path = Path(path)
        if not path.exists():
            return ledger
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                raw = json.loads(line)
                record = EvalRecord(
                    subset_key=raw["key"],
                    n_numerical=raw["n_numerical"],
                    n_categorical=raw["n_categorical"],
                    kept_numerical=tuple(raw["kept_numerical"]),
                    kept_categorical=tuple(raw["kept_categorical"]),
                    auc=raw["auc"],
                    logloss=raw["logloss"],
                    train_time_s=raw["train_time_s"],
                    epochs_run=raw["epochs_run"],
                    tag=raw["tag"],
                )
                ledger.entries[record.subset_key] = record
        return ledger

    def __len__(self) -> int:
        return len(self.entries)

    def seen(self, key: str) -> bool:
        return key in self.entries or key in self.failures

    def get(self, key: str) -> EvalRecord | None:
        return self.entries.get(key)

    def records(self) -> list[EvalRecord]:
        return list(self.entries.values())

    def add(self, record: EvalRecord) -> None:
        if record.subset_key in self.entries:
            raise ValueError(f"duplicate ledger key {record.subset_key!r}")
        self.entries[record.subset_key] = record
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            payload = {
                "key": record.subset_key,
                "n_numerical": record.n_numerical,
                "n_categorical": record.n_categorical,
                "kept_numerical": list(record.kept_numerical),
                "kept_categorical": list(record.kept_categorical),
                "auc": record.auc,
                "logloss": record.logloss,
                "train_time_s": record.train_time_s,
                "epochs_run": record.epochs_run,
                "tag": record.tag,
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            }
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(payload) + "\n")

    def record_failure(self, key: str, message: str) -> None:
        self.failures[key] = message
        log.warning("evaluation failed for %s: %s", key, message)


def _finalize(record: EvalRecord, subset: FeatureSubset, tag: str) -> EvalRecord:
    record.subset_key = subset.key
    record.n_numerical, record.n_categorical = subset.counts
    record.kept_numerical = tuple(subset.kept_numerical)
    record.kept_categorical = tuple(subset.kept_categorical)
    record.tag = tag
    return record


def _evaluate_into(subset: FeatureSubset, evaluator: Evaluator,
                   ledger: Ledger, tag: str) -> bool:
    """Evaluate unless the key is already known; returns True on a new
    successful record."""
    key = subset.key
    if ledger.seen(key):
        return False
    try:
        record = evaluator(subset)
    except Exception as exc:  # one bad subset must not kill the search
        ledger.record_failure(key, str(exc))
        return False
    ledger.add(_finalize(record, subset, tag))
    return True


# -- general search -----------------------------------------------------

def _levels(full: int, step: int) -> list[int]:
    """full, full-step, full-2*step, ... while the next removal leaves at
    least one feature."""
    if full == 0:
        return [0]
    levels = [full]
    if step >= 1:
        while levels[-1] - step >= 1:
            levels.append(levels[-1] - step)
    return levels


def general_schedule(ranked: RankedFeatures,
                     params: SearchParams) -> list[FeatureSubset]:
    """Nested removal grid: outer loop over categorical levels, inner loop
    over numerical levels; the first subset is the full feature set."""
    n_num = len(ranked.numerical)
    n_cat = len(ranked.categorical)
    if n_num + n_cat == 0:
        raise ValueError("ranked feature lists are empty")
    if n_cat > 0 and params.i < 1:
        raise ValueError("i must be >= 1 when categorical features exist")
    return [prefix_subset(ranked, num_level, cat_level)
            for cat_level in _levels(n_cat, params.i)
            for num_level in _levels(n_num, params.j)]


def run_general_search(ranked: RankedFeatures, params: SearchParams,
                       evaluator: Evaluator, ledger: Ledger,
                       workers: int = 1) -> Ledger:
    """Evaluate the whole schedule (first subset tagged ``base``, the rest
    ``general``), skipping keys the ledger already holds."""
    schedule = general_schedule(ranked, params)
    pending = [(idx, subset) for idx, subset in enumerate(schedule)
               if not ledger.seen(subset.key)]

    def tag_for(idx: int) -> str:
        return "base" if idx == 0 else "general"

    if workers <= 1 or len(pending) <= 1:
        for idx, subset in pending:
            _evaluate_into(subset, evaluator, ledger, tag_for(idx))
        return ledger

    # Evaluations are independent; results are recorded in schedule order
    # so the ledger is identical to a sequential run.
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(idx, subset, pool.submit(evaluator, subset))
                   for idx, subset in pending]
        for idx, subset, future in futures:
            try:
                record = future.result()
            except Exception as exc:
                ledger.record_failure(subset.key, str(exc))
                continue
            ledger.add(_finalize(record, subset, tag_for(idx)))
    return ledger


# -- top-k selection ----------------------------------------------------

def rank_records(records: Iterable[EvalRecord]) -> list[EvalRecord]:
    """AUC-descending; ties broken by fewer total features, then by earlier
    insertion."""
    indexed = list(enumerate(records))
    indexed.sort(key=lambda pair: (-pair[1].auc, pair[1].n_features, pair[0]))
    return [record for _, record in indexed]


def select_top_k(ledger: Ledger, k: int, ranked: RankedFeatures,
                 tags: tuple[str, ...] | None = None) -> list[FeatureSubset]:
    """The k highest-AUC subsets recorded in the ledger (optionally only
    those with the given tags), best first."""
    records = [r for r in ledger.records() if tags is None or r.tag in tags]
    if not records:
        raise SearchError("ledger holds no successful evaluations")
    if k > len(records):
        log.warning("requested top %d but only %d evaluated subsets exist",
                    k, len(records))
    chosen = rank_records(records)[:k]
    return [subset_from_kept(ranked, r.kept_numerical + r.kept_categorical)
            for r in chosen]


# -- neighborhood moves -------------------------------------------------

def _rank_of(ranked: RankedFeatures) -> dict[str, int]:
    ranks = {f.name: f.rank for f in ranked.numerical}
    ranks.update({f.name: f.rank for f in ranked.categorical})
    return ranks


def _restore_best(pool: list[str], ranks: dict[str, int]) -> str:
    """Remove and return the highest-scored (lowest-rank) feature."""
    best = min(pool, key=lambda name: ranks[name])
    pool.remove(best)
    return best


def _insert_ranked(kept: list[str], name: str, ranks: dict[str, int]) -> None:
    position = 0
    while position < len(kept) and ranks[kept[position]] < ranks[name]:
        position += 1
    kept.insert(position, name)


def up_move(subset: FeatureSubset, ranked: RankedFeatures,
            j: int) -> FeatureSubset | None:
    """One up-neighborhood step.

    With removed numericals available, restore the highest-scored one.
    Otherwise restore the most recently removed categorical and drop the j
    lowest-scored kept numericals; if that empties the numerical side, the
    highest-scored of the just-removed numericals is put back immediately.
    Returns None when nothing is removed (the subset is the full set).
    """
    if not subset.removed_numerical and not subset.removed_categorical:
        return None
    ranks = _rank_of(ranked)
    kept_num = list(subset.kept_numerical)
    kept_cat = list(subset.kept_categorical)
    rem_num = list(subset.removed_numerical)
    rem_cat = list(subset.removed_categorical)

    if not rem_num:
        # rem_cat is non-empty here: both-empty was handled above
        _insert_ranked(kept_cat, rem_cat.pop(), ranks)
        for _ in range(min(j, len(kept_num))):
            rem_num.append(kept_num.pop())
        if not kept_num and rem_num:
            _insert_ranked(kept_num, _restore_best(rem_num, ranks), ranks)
    else:
        _insert_ranked(kept_num, _restore_best(rem_num, ranks), ranks)

    return FeatureSubset(tuple(kept_num), tuple(kept_cat),
                         tuple(rem_num), tuple(rem_cat))


def down_move(subset: FeatureSubset,
              ranked: RankedFeatures) -> FeatureSubset | None:
    """One down-neighborhood step.

    Drop the lowest-scored kept numerical; if that empties the numerical
    side, also drop the lowest-scored kept categorical and bring every
    removed numerical back. A subset with no kept numericals just drops a
    categorical. Returns None when the move would empty the subset.
    """
    ranks = _rank_of(ranked)
    kept_num = list(subset.kept_numerical)
    kept_cat = list(subset.kept_categorical)
    rem_num = list(subset.removed_numerical)
    rem_cat = list(subset.removed_categorical)

    if kept_num:
        rem_num.append(kept_num.pop())
        if not kept_num:
            if not kept_cat:
                return None
            rem_cat.append(kept_cat.pop())
            kept_num = sorted(rem_num, key=lambda name: ranks[name])
            rem_num = []
    else:
        if len(kept_cat) <= 1:
            return None
        rem_cat.append(kept_cat.pop())

    return FeatureSubset(tuple(kept_num), tuple(kept_cat),
                         tuple(rem_num), tuple(rem_cat))


def up_search(start: FeatureSubset, ranked: RankedFeatures,
              params: SearchParams, evaluator: Evaluator, ledger: Ledger,
              tag: str = "u") -> Ledger:
    """u iterations of up moves from ``start``; already-seen subsets are
    skipped but still consume budget."""
    current = start
    for _ in range(params.u):
        nxt = up_move(current, ranked, params.j)
        if nxt is None:
            break
        _evaluate_into(nxt, evaluator, ledger, tag)
        current = nxt
    return ledger


def down_search(start: FeatureSubset, ranked: RankedFeatures,
                params: SearchParams, evaluator: Evaluator, ledger: Ledger,
                tag: str = "d") -> Ledger:
    """d iterations of down moves from ``start``, halting once a derived
    subset is at or below ``min_total`` features."""
    current = start
    if current.size <= params.min_total:
        return ledger
    for _ in range(params.d):
        nxt = down_move(current, ranked)
        if nxt is None:
            break
        _evaluate_into(nxt, evaluator, ledger, tag)
        current = nxt
        if current.size <= params.min_total:
            break
    return ledger


# -- full run -----------------------------------------------------------

def best_subset(ledger: Ledger, ranked: RankedFeatures) -> FeatureSubset:
    records = ledger.records()
    if not records:
        raise SearchError("no successful evaluations to choose from")
    best = rank_records(records)[0]
    return subset_from_kept(ranked, best.kept_numerical + best.kept_categorical)


def run_neshfs(ranked: RankedFeatures, params: SearchParams,
               evaluator: Evaluator, ledger: Ledger | None = None,
               workers: int = 1) -> tuple[FeatureSubset, Ledger]:
    """General search, then up+down refinement around the top k general
    results; returns the highest-AUC subset seen anywhere."""
    ledger = ledger if ledger is not None else Ledger()
    run_general_search(ranked, params, evaluator, ledger, workers=workers)
    if params.k > 0:
        starts = select_top_k(ledger, params.k, ranked, tags=GENERAL_TAGS)
        for position, start in enumerate(starts, start=1):
            up_search(start, ranked, params, evaluator, ledger,
                      tag=f"{position}-u")
            down_search(start, ranked, params, evaluator, ledger,
                        tag=f"{position}-d")
    return best_subset(ledger, ranked), ledger
