"""Genetic-algorithm baseline: free-form bitmask search over all features.

Unlike the prefix-walking engine in :mod:`neshfs.search`, the GA explores
arbitrary feature combinations. It shares the same evaluation ledger, so a
mask that coincides with an already-evaluated subset is not retrained.
Truncation selection, single-point crossover, fixed-count bit-flip
mutation, and one elite carried forward unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluator import EvalRecord
from .scoring import RankedFeatures
from .search import Evaluator, Ledger, _evaluate_into, subset_from_kept


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 8
    mating_pool: int = 4
    mutate_genes: int = 3
    generations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 1 or self.generations < 1:
            raise ValueError("population_size and generations must be >= 1")
        if not 1 <= self.mating_pool <= self.population_size:
            raise ValueError("mating_pool must be in [1, population_size]")
        if self.mutate_genes < 0:
            raise ValueError("mutate_genes must be >= 0")


def _feature_names(ranked: RankedFeatures) -> tuple[str, ...]:
    # Chromosome bit order: numerical ranks first, then categorical ranks.
    return ranked.numerical_names + ranked.categorical_names


def _repair(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if not mask.any():
        mask[rng.integers(mask.size)] = True
    return mask


def single_point_crossover(parent_a: np.ndarray, parent_b: np.ndarray,
                           point: int) -> np.ndarray:
    return np.concatenate([parent_a[:point], parent_b[point:]])


def flip_bits(mask: np.ndarray, positions: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[positions] = ~out[positions]
    return out


def _mask_fitness(mask: np.ndarray, names: tuple[str, ...],
                  ranked: RankedFeatures, evaluator: Evaluator,
                  ledger: Ledger) -> float:
    subset = subset_from_kept(ranked, [n for n, bit in zip(names, mask) if bit])
    _evaluate_into(subset, evaluator, ledger, "ga")
    record = ledger.get(subset.key)
    # A failed evaluation counts as fitness 0 rather than aborting the run.
    return record.auc if record is not None else 0.0


def ga_select(ranked: RankedFeatures, config: GAConfig, evaluator: Evaluator,
              ledger: Ledger | None = None) -> tuple[EvalRecord, list[float]]:
    """Evolve feature bitmasks for ``config.generations`` generations.

    Returns the ledger record of the best mask found and the
    per-generation best-fitness history (non-decreasing under elitism).
    """
    ledger = ledger if ledger is not None else Ledger()
    names = _feature_names(ranked)
    length = len(names)
    if length < 2:
        raise ValueError("need at least 2 features for a GA search")
    if config.mutate_genes > length:
        raise ValueError("mutate_genes cannot exceed the number of features")

    rng = np.random.default_rng(config.seed)
    population = [_repair(rng.random(length) < 0.5, rng)
                  for _ in range(config.population_size)]

    history: list[float] = []
    best_mask: np.ndarray | None = None
    best_fitness = -1.0
    for generation in range(config.generations):
        fitness = np.array([_mask_fitness(mask, names, ranked, evaluator, ledger)
                            for mask in population])
        order = np.argsort(-fitness, kind="stable")
        if fitness[order[0]] > best_fitness:
            best_fitness = float(fitness[order[0]])
            best_mask = population[order[0]].copy()
        history.append(float(fitness[order[0]]))

        if generation == config.generations - 1:
            break
        parents = [population[i] for i in order[:config.mating_pool]]
        next_population = [population[order[0]].copy()]  # elite survives as-is
        while len(next_population) < config.population_size:
            pair = rng.integers(0, len(parents), size=2)
            point = int(rng.integers(1, length))
            child = single_point_crossover(parents[pair[0]], parents[pair[1]],
                                           point)
            if config.mutate_genes > 0:
                flips = rng.choice(length, size=config.mutate_genes,
                                   replace=False)
                child = flip_bits(child, flips)
            next_population.append(_repair(child, rng))
        population = next_population

    subset = subset_from_kept(
        ranked, [n for n, bit in zip(names, best_mask) if bit])
    record = ledger.get(subset.key)
    if record is None:
        raise RuntimeError("best GA mask has no ledger record")
    return record, history
