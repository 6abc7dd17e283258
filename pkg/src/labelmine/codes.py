"""Labeling codes and the operators that transform them.

A labeling code assigns one of C class indices to each of L dataset
instances; it is the genome evolved by the genetic algorithm and the state
perturbed by simulated annealing.  Codes are plain int64 numpy arrays so the
engines can store whole populations as 2-D arrays.  Every randomized
operator is a pure function of its inputs and an integer seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import rng_from

CODE_DTYPE = np.int64


@dataclass(frozen=True)
class ProblemSpec:
    """Size of a label-search problem: L instances, C classes."""

    num_instances: int
    num_classes: int

    def __post_init__(self):
        if self.num_instances < 1:
            raise ValueError(f"num_instances must be >= 1, got {self.num_instances}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def search_space_size(self) -> int:
        # Exact big integer; the space itself is never materialized.
        return self.num_classes**self.num_instances


def as_code(labels, num_classes: int | None = None) -> np.ndarray:
    """Coerce to an int64 label vector, validating the class alphabet."""
    code = np.asarray(labels, dtype=CODE_DTYPE)
    if code.ndim != 1:
        raise ValueError(f"labeling code must be 1-D, got shape {code.shape}")
    if code.size and code.min() < 0:
        raise ValueError("labeling code contains negative class indices")
    if num_classes is not None and code.size and code.max() >= num_classes:
        raise ValueError(
            f"labeling code contains class {int(code.max())} >= num_classes {num_classes}"
        )
    return code


def validate_code(code: np.ndarray, spec: ProblemSpec) -> None:
    """Raise if `code` is not a valid labeling code for `spec`."""
    if code.shape != (spec.num_instances,):
        raise ValueError(
            f"expected code of length {spec.num_instances}, got shape {code.shape}"
        )
    if code.min() < 0 or code.max() >= spec.num_classes:
        raise ValueError("labels outside [0, num_classes)")


def new_random_code(spec: ProblemSpec, seed: int) -> np.ndarray:
    """Uniform random labeling code for the given problem spec."""
    rng = rng_from(seed)
    return rng.integers(0, spec.num_classes, size=spec.num_instances, dtype=CODE_DTYPE)


def label_accuracy(code: np.ndarray, ground_truth: np.ndarray) -> float:
    """Fraction of positions where `code` agrees with `ground_truth`."""
    code = np.asarray(code)
    ground_truth = np.asarray(ground_truth)
    if code.shape != ground_truth.shape:
        raise ValueError(
            f"length mismatch: code {code.shape} vs ground truth {ground_truth.shape}"
        )
    return float(np.mean(code == ground_truth))


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Number of positions where the two codes differ."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def crossover_half(parent_a: np.ndarray, parent_b: np.ndarray):
    """Half-way merge of two parent codes.

    The parents are split at floor(L/2) and opposing segments are joined:
    child one is the head of `parent_a` plus the tail of `parent_b`, child
    two the reverse pairing.
    """
    a = np.asarray(parent_a)
    b = np.asarray(parent_b)
    if a.shape != b.shape:
        raise ValueError(f"parent length mismatch: {a.shape} vs {b.shape}")
    m = a.shape[0] // 2
    child_1 = np.concatenate([a[:m], b[m:]])
    child_2 = np.concatenate([b[:m], a[m:]])
    return child_1, child_2


def mutate_inversion(code: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Reverse one random contiguous segment covering `fraction` of the genes.

    The segment length is max(2, round(fraction * L)), clamped to L, and its
    start position is uniform.  The label multiset is preserved exactly.
    Codes shorter than 2 have no invertible segment and are returned as-is.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    code = np.asarray(code)
    n = code.shape[0]
    out = code.copy()
    if n < 2:
        return out
    k = min(n, max(2, int(round(fraction * n))))
    rng = rng_from(seed)
    start = int(rng.integers(0, n - k + 1))
    out[start : start + k] = out[start : start + k][::-1]
    return out


def neighbor(code: np.ndarray, radius: int, num_classes: int, seed: int) -> np.ndarray:
    """Random code within Hamming distance `radius` of `code` (never equal).

    Between 1 and `radius` positions (uniformly many) are redrawn, each to a
    uniformly chosen label different from its current one.  A radius larger
    than the code is clamped.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    code = np.asarray(code)
    n = code.shape[0]
    r = min(int(radius), n)
    rng = rng_from(seed)
    d = int(rng.integers(1, r + 1))
    positions = rng.choice(n, size=d, replace=False)
    out = code.copy()
    # Draw from the C-1 labels other than the current one at each position.
    draws = rng.integers(0, num_classes - 1, size=d, dtype=CODE_DTYPE)
    draws += draws >= out[positions]
    out[positions] = draws
    return out
