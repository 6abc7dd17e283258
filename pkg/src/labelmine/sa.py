"""Simulated annealing over labeling codes with Metropolis acceptance.

One state (code) is perturbed through a fixed number of transitions per
outer iteration.  Each transition generates a fresh neighborhood of codes
within a Hamming radius of the current state, picks one uniformly and
evaluates it: better or equal states are always accepted, worse ones with
probability exp((E_current - E_candidate) / (k_b * T)) under a geometric
cooling schedule T_k = T0 * alpha^k.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .classifiers import ClassifierKind
from .codes import ProblemSpec, neighbor, new_random_code
from .dataset import ExperimentSplit
from .fitness import evaluate, evaluation_seed, to_energy
from .seeding import (
    TAG_ACCEPT,
    TAG_CANDIDATE_PICK,
    TAG_INIT,
    TAG_NEIGHBOR,
    derive_seed,
    rng_from,
)


@dataclass(frozen=True)
class SAConfig:
    iterations: int = 50
    transitions_per_iteration: int = 10
    neighborhood_size: int = 50
    neighbor_radius: int = 5
    initial_temperature: float = 0.1
    cooling_factor: float = 0.95
    boltzmann_k: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        for name in ("transitions_per_iteration", "neighborhood_size", "neighbor_radius"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.initial_temperature <= 0:
            raise ValueError(f"initial_temperature must be > 0, got {self.initial_temperature}")
        if not 0.0 < self.cooling_factor < 1.0:
            raise ValueError(f"cooling_factor must be in (0, 1), got {self.cooling_factor}")
        if self.boltzmann_k <= 0:
            raise ValueError(f"boltzmann_k must be > 0, got {self.boltzmann_k}")


@dataclass(frozen=True)
class SATraceEntry:
    temperature: float
    current_fitness: float
    best_fitness: float
    accepted: int


@dataclass(frozen=True)
class SAResult:
    best_code: np.ndarray
    best_fitness: float
    trace: tuple  # one SATraceEntry per iteration
    initial_code: np.ndarray
    initial_fitness: float
    elapsed_s: float
    master_seed: int


def accept_probability(
    energy_current: float,
    energy_candidate: float,
    temperature: float,
    boltzmann_k: float = 1.0,
) -> float:
    """Metropolis acceptance: min(1, exp((E_i - E_j) / (k_b * T))).

    E_i is the current state's energy, E_j the candidate's; a candidate at
    equal or lower energy is accepted with probability one.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    if boltzmann_k <= 0:
        raise ValueError(f"boltzmann_k must be > 0, got {boltzmann_k}")
    if energy_candidate <= energy_current:
        return 1.0
    return math.exp((energy_current - energy_candidate) / (boltzmann_k * temperature))


def run_sa(config: SAConfig, split: ExperimentSplit, kind: ClassifierKind) -> SAResult:
    """Full annealing run; reproducible from config.master_seed alone."""
    t0 = time.perf_counter()
    problem = ProblemSpec(split.train.features.shape[0], split.num_classes)
    ms = config.master_seed
    num_classes = split.num_classes

    current = new_random_code(problem, derive_seed(ms, TAG_INIT, 0, 0))
    current_fitness = evaluate(current, split, kind, evaluation_seed(ms, current))
    initial_code = current.copy()
    initial_fitness = current_fitness
    best_code = current.copy()
    best_fitness = current_fitness

    trace = []
    transition = 0
    for it in range(config.iterations):
        temperature = config.initial_temperature * config.cooling_factor**it
        accepted = 0
        for _ in range(config.transitions_per_iteration):
            transition += 1
            neighborhood = [
                neighbor(
                    current,
                    config.neighbor_radius,
                    num_classes,
                    derive_seed(ms, TAG_NEIGHBOR, transition, j),
                )
                for j in range(config.neighborhood_size)
            ]
            pick = rng_from(derive_seed(ms, TAG_CANDIDATE_PICK, transition))
            candidate = neighborhood[int(pick.integers(0, config.neighborhood_size))]
            candidate_fitness = evaluate(
                candidate, split, kind, evaluation_seed(ms, candidate)
            )
            p = accept_probability(
                to_energy(current_fitness),
                to_energy(candidate_fitness),
                temperature,
                config.boltzmann_k,
            )
            if p >= 1.0:
                take = True
            else:
                u = rng_from(derive_seed(ms, TAG_ACCEPT, transition)).random()
                take = u < p
            if take:
                current = candidate
                current_fitness = candidate_fitness
                accepted += 1
            if candidate_fitness > best_fitness:
                best_code = candidate.copy()
                best_fitness = candidate_fitness
        trace.append(
            SATraceEntry(
                temperature=temperature,
                current_fitness=current_fitness,
                best_fitness=best_fitness,
                accepted=accepted,
            )
        )

    return SAResult(
        best_code=best_code,
        best_fitness=best_fitness,
        trace=tuple(trace),
        initial_code=initial_code,
        initial_fitness=initial_fitness,
        elapsed_s=time.perf_counter() - t0,
        master_seed=ms,
    )
