"""The search objective: validation accuracy of a classifier trained on a
candidate labeling code.

A candidate code relabels the training rows of an experiment split; a fresh
classifier is trained on it and scored against the held-out validation set,
whose ground-truth labels are the only supervision the search ever sees.
Simulated annealing works on the negated value ("energy", lower is better).
"""

from __future__ import annotations

import hashlib

import numpy as np

from .classifiers import ClassifierKind, fit, validation_accuracy
from .codes import as_code
from .dataset import ExperimentSplit


def evaluate(
    code: np.ndarray,
    split: ExperimentSplit,
    kind: ClassifierKind,
    seed: int,
) -> float:
    """Fitness of `code` on `split`: train on the code, score on ground truth."""
    code = as_code(code, split.num_classes)
    n_train = split.train.features.shape[0]
    if code.shape[0] != n_train:
        raise ValueError(f"code length {code.shape[0]} != {n_train} training rows")
    model = fit(kind, split.train.features, code, split.num_classes, seed)
    return validation_accuracy(model, split.validation)


def to_energy(fitness: float) -> float:
    """Annealing energy of a fitness value: its negation (lower is better)."""
    if not 0.0 <= fitness <= 1.0:
        raise ValueError(f"fitness must be in [0, 1], got {fitness}")
    return -float(fitness)


def evaluation_seed(master_seed: int, code: np.ndarray) -> int:
    """Classifier seed for one evaluation: a keyed hash of the code itself.

    Fitness is thereby a deterministic function of (master seed, code):
    evaluation order and parallel fan-out cannot change results, and a
    search cannot inflate a code's fitness by having it re-drawn under a
    luckier model initialization or bootstrap.  Two different codes still
    get different, unpredictable model seeds.
    """
    key = (int(master_seed) & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(
        np.ascontiguousarray(code, dtype=np.int64).tobytes(),
        digest_size=8,
        key=key,
    ).digest()
    return int.from_bytes(digest, "little")
