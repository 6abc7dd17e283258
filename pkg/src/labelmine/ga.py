"""Genetic algorithm over labeling codes.

The population is an (N, L) array of codes.  Each generation keeps the top
fraction as parents, fills the next population with half-way-merge children
of consecutive ranked parent pairs (cycling), and mutates by gene-order
inversion.  With elitism on, the best individuals pass through untouched,
keeping their fitness values, which makes the per-generation best exactly
non-decreasing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .classifiers import ClassifierKind
from .codes import ProblemSpec, crossover_half, mutate_inversion, new_random_code
from .dataset import ExperimentSplit
from .fitness import evaluate, evaluation_seed
from .seeding import TAG_INIT, TAG_MUTATION, TAG_MUTATION_GATE, derive_seed, rng_from


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 50
    iterations: int = 50
    elitism: bool = False
    elite_count: int = 2
    parent_fraction: float = 0.5
    mutation_fraction: float = 0.10
    mutation_probability: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError(f"population_size must be >= 2, got {self.population_size}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.elitism and not 0 < self.elite_count < self.population_size:
            raise ValueError(
                f"elite_count must be in (0, {self.population_size}), got {self.elite_count}"
            )
        if math.ceil(self.parent_fraction * self.population_size) < 2:
            raise ValueError("parent_fraction too small: need at least 2 parents")
        if not 0.0 < self.mutation_fraction <= 1.0:
            raise ValueError(f"mutation_fraction must be in (0, 1], got {self.mutation_fraction}")
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise ValueError(
                f"mutation_probability must be in [0, 1], got {self.mutation_probability}"
            )


@dataclass(frozen=True)
class GAResult:
    best_code: np.ndarray
    best_fitness: float
    history_best: np.ndarray  # length iterations+1, index 0 = initial population
    history_mean: np.ndarray
    final_population_fitnesses: np.ndarray
    initial_best_code: np.ndarray
    initial_best_fitness: float
    elapsed_s: float
    master_seed: int


def _ranked_order(fitnesses: np.ndarray) -> np.ndarray:
    """Indices by descending fitness; ties broken by lower population index."""
    n = fitnesses.shape[0]
    return np.lexsort((np.arange(n), -np.asarray(fitnesses, dtype=np.float64)))


def select_parents(
    population: np.ndarray, fitnesses: np.ndarray, fraction: float
) -> np.ndarray:
    """The ceil(fraction*N) fittest codes, in descending-fitness order."""
    population = np.asarray(population)
    if population.ndim != 2 or population.shape[0] == 0:
        raise ValueError(f"population must be a nonempty (N, L) array, got {population.shape}")
    n = population.shape[0]
    if np.asarray(fitnesses).shape != (n,):
        raise ValueError("fitnesses length does not match population size")
    k = math.ceil(fraction * n)
    if k < 2:
        raise ValueError(f"fraction {fraction} of {n} individuals yields fewer than 2 parents")
    return population[_ranked_order(fitnesses)[:k]]


def step_generation(
    population: np.ndarray,
    fitnesses: np.ndarray,
    config: GAConfig,
    generation_index: int,
) -> np.ndarray:
    """Produce the next population of the same size.

    With elitism the first elite_count rows are the previous best, copied
    verbatim; all other rows are crossover children, each mutated with
    probability mutation_probability.
    """
    population = np.asarray(population)
    n = population.shape[0]
    if n != config.population_size:
        raise ValueError(f"population size {n} != configured {config.population_size}")
    parents = select_parents(population, fitnesses, config.parent_fraction)
    k = parents.shape[0]

    n_elite = config.elite_count if config.elitism else 0
    slots = n - n_elite
    children: list[np.ndarray] = []
    pair = 0
    while len(children) < slots:
        a = parents[(2 * pair) % k]
        b = parents[(2 * pair + 1) % k]
        c1, c2 = crossover_half(a, b)
        children.append(c1)
        children.append(c2)
        pair += 1
    children = children[:slots]

    gate = rng_from(derive_seed(config.master_seed, TAG_MUTATION_GATE, generation_index))
    mutate = gate.random(slots) < config.mutation_probability
    for i in range(slots):
        if mutate[i]:
            children[i] = mutate_inversion(
                children[i],
                config.mutation_fraction,
                derive_seed(config.master_seed, TAG_MUTATION, generation_index, i),
            )

    if n_elite:
        elites = population[_ranked_order(fitnesses)[:n_elite]]
        return np.vstack([elites, np.stack(children)])
    return np.stack(children)


def run_ga(config: GAConfig, split: ExperimentSplit, kind: ClassifierKind) -> GAResult:
    """Full GA run; reproducible from config.master_seed alone."""
    t0 = time.perf_counter()
    problem = ProblemSpec(split.train.features.shape[0], split.num_classes)
    n = config.population_size
    ms = config.master_seed

    population = np.stack(
        [new_random_code(problem, derive_seed(ms, TAG_INIT, 0, i)) for i in range(n)]
    )
    fitnesses = np.array(
        [
            evaluate(population[i], split, kind, evaluation_seed(ms, population[i]))
            for i in range(n)
        ]
    )
    history_best = [float(fitnesses.max())]
    history_mean = [float(fitnesses.mean())]
    init_order = _ranked_order(fitnesses)
    initial_best_code = population[init_order[0]].copy()
    initial_best_fitness = float(fitnesses[init_order[0]])

    n_elite = config.elite_count if config.elitism else 0
    for gen in range(1, config.iterations + 1):
        elite_fitnesses = fitnesses[_ranked_order(fitnesses)[:n_elite]] if n_elite else None
        population = step_generation(population, fitnesses, config, gen)
        new_fitnesses = np.empty(n)
        if n_elite:
            # elites carry their fitness; re-evaluation would re-randomize it
            new_fitnesses[:n_elite] = elite_fitnesses
        for i in range(n_elite, n):
            new_fitnesses[i] = evaluate(
                population[i], split, kind, evaluation_seed(ms, population[i])
            )
        fitnesses = new_fitnesses
        history_best.append(float(fitnesses.max()))
        history_mean.append(float(fitnesses.mean()))

    best_idx = int(_ranked_order(fitnesses)[0])
    return GAResult(
        best_code=population[best_idx].copy(),
        best_fitness=float(fitnesses[best_idx]),
        history_best=np.array(history_best),
        history_mean=np.array(history_mean),
        final_population_fitnesses=fitnesses,
        initial_best_code=initial_best_code,
        initial_best_fitness=initial_best_fitness,
        elapsed_s=time.perf_counter() - t0,
        master_seed=ms,
    )
