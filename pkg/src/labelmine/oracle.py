"""Exhaustive search oracle for desk-scale acceptance problems.

Enumerating all C^L codes is exactly what the metaheuristics exist to
avoid; on tiny synthetic problems it is affordable and gives the exact
global optimum that the engines are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .classifiers import ClassifierKind
from .codes import CODE_DTYPE
from .dataset import ExperimentSplit, make_synthetic_split
from .fitness import evaluate
from .ga import GAConfig, run_ga
from .sa import SAConfig, run_sa
from .seeding import TAG_RUN, derive_seed

MAX_EVALUATIONS = 2**20


@dataclass(frozen=True)
class OracleResult:
    best_code: np.ndarray
    best_fitness: float
    evaluations: int


def brute_force_oracle(
    split: ExperimentSplit,
    kind: ClassifierKind = ClassifierKind.CENTROID,
) -> OracleResult:
    """Evaluate every possible code; exact argmax, ties to the lexicographically
    smallest code.  Refuses search spaces larger than 2^20."""
    num_instances = split.train.features.shape[0]
    num_classes = split.num_classes
    total = num_classes**num_instances
    if total > MAX_EVALUATIONS:
        raise ValueError(
            f"search space {num_classes}^{num_instances} = {total} exceeds the "
            f"oracle guard of {MAX_EVALUATIONS} evaluations"
        )
    best_code = None
    best_fitness = -1.0
    evaluations = 0
    for labels in product(range(num_classes), repeat=num_instances):
        code = np.array(labels, dtype=CODE_DTYPE)
        fitness = evaluate(code, split, kind, seed=0)
        evaluations += 1
        if fitness > best_fitness:  # strict: lexicographic order wins ties
            best_fitness = fitness
            best_code = code
    return OracleResult(best_code=best_code, best_fitness=best_fitness, evaluations=evaluations)


# -- acceptance problem -------------------------------------------------------

# Small enough to enumerate (2^6 codes), separable enough that the exact
# optimum is meaningful, and the deterministic CENTROID fitness keeps the
# engines' success rates a property of the search, not of training noise.
ACCEPTANCE_INSTANCES = 6
ACCEPTANCE_CLASSES = 2
ACCEPTANCE_FEATURES = 8
ACCEPTANCE_SEPARATION = 12.0


@dataclass(frozen=True)
class AcceptanceOutcome:
    oracle: OracleResult
    search_space: int
    ga_successes: int
    sa_successes: int
    runs: int


def acceptance_split(master_seed: int = 101) -> ExperimentSplit:
    return make_synthetic_split(
        ACCEPTANCE_INSTANCES,
        ACCEPTANCE_CLASSES,
        ACCEPTANCE_FEATURES,
        ACCEPTANCE_SEPARATION,
        seed=master_seed,
        val_size=30,
    )


def oracle_acceptance(runs: int = 20, master_seed: int = 101) -> AcceptanceOutcome:
    """Exhaustive optimum vs. seeded GA and SA runs on the tiny problem."""
    split = acceptance_split(master_seed)
    kind = ClassifierKind.CENTROID
    oracle = brute_force_oracle(split, kind)
    target = oracle.best_fitness - 1e-12

    ga_successes = 0
    sa_successes = 0
    for r in range(runs):
        ga_config = GAConfig(
            population_size=20,
            iterations=30,
            elitism=True,
            master_seed=derive_seed(master_seed, TAG_RUN, 0, r),
        )
        if run_ga(ga_config, split, kind).best_fitness >= target:
            ga_successes += 1
        sa_config = SAConfig(
            iterations=25,
            transitions_per_iteration=10,
            neighborhood_size=10,
            neighbor_radius=2,
            master_seed=derive_seed(master_seed, TAG_RUN, 1, r),
        )
        if run_sa(sa_config, split, kind).best_fitness >= target:
            sa_successes += 1
    return AcceptanceOutcome(
        oracle=oracle,
        search_space=split.num_classes ** split.train.features.shape[0],
        ga_successes=ga_successes,
        sa_successes=sa_successes,
        runs=runs,
    )
