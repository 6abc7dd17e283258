"""Benchmark of the compiled kernels against the pure-numpy fallback.

Times one classifier fit per backend on a grid-shaped problem (200 rows of
784 byte-quantized features, labels near chance level), which is the unit
of work the engines repeat hundreds of thousands of times.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .classifiers import (
    MLP_EPOCHS,
    MLP_HIDDEN,
    MLP_LR,
    RF_MAX_DEPTH,
    RF_TREES,
    SVM_EPOCHS,
    SVM_L2,
    SVM_LR,
    get_kernels,
)


@dataclass(frozen=True)
class BenchResult:
    kind: str
    backend: str
    ms_per_fit: float
    repeats: int


def _problem(rows: int, cols: int, num_classes: int, seed: int):
    rng = np.random.default_rng(seed)
    levels = np.where(rng.random((rows, cols)) < 0.75, 0, rng.integers(0, 256, (rows, cols)))
    X = np.ascontiguousarray(levels / 255.0, dtype=np.float32)
    Xq = np.ascontiguousarray(levels, dtype=np.uint8)
    y = rng.integers(0, num_classes, rows).astype(np.int32)
    return X, Xq, y


def _time(fn, min_repeats: int, budget_s: float = 2.0) -> tuple[float, int]:
    fn()  # warm-up
    reps = 0
    t0 = time.perf_counter()
    while reps < min_repeats or time.perf_counter() - t0 < budget_s:
        fn()
        reps += 1
        if reps >= 200:
            break
    return (time.perf_counter() - t0) / reps * 1e3, reps


def run_benchmark(
    rows: int = 200,
    cols: int = 784,
    num_classes: int = 10,
    seed: int = 0,
    backends: tuple[str, ...] = ("compiled", "numpy"),
) -> list[BenchResult]:
    X, Xq, y = _problem(rows, cols, num_classes, seed)
    mtry = max(1, min(cols, round(math.sqrt(cols))))
    tree_seeds = np.arange(1, RF_TREES + 1, dtype=np.uint64) * np.uint64(0x9E3779B9)
    results = []
    for name in backends:
        try:
            kern = get_kernels(name)
        except ImportError:
            continue

        def mlp():
            rng = np.random.default_rng(seed)
            W1 = rng.standard_normal((cols, MLP_HIDDEN), dtype=np.float32)
            W1 *= np.float32(1.0 / math.sqrt(cols))
            W2 = rng.standard_normal((MLP_HIDDEN, num_classes), dtype=np.float32)
            W2 *= np.float32(1.0 / math.sqrt(MLP_HIDDEN))
            kern.mlp_train(
                X, y,
                W1, np.zeros(MLP_HIDDEN, np.float32),
                W2, np.zeros(num_classes, np.float32),
                MLP_EPOCHS, MLP_LR,
            )

        def svm():
            kern.svm_train(
                X, y,
                np.zeros((cols, num_classes), np.float32),
                np.zeros(num_classes, np.float32),
                SVM_EPOCHS, SVM_LR, SVM_L2,
            )

        def rf():
            kern.rf_build(X, y, num_classes, RF_TREES, RF_MAX_DEPTH, mtry, True, tree_seeds, Xq)

        for kind, fn, min_reps in (("nn", mlp, 10), ("svm", svm, 10), ("rf", rf, 5)):
            ms, reps = _time(fn, min_reps)
            results.append(BenchResult(kind=kind, backend=name, ms_per_fit=ms, repeats=reps))
    return results


def render_benchmark(results: list[BenchResult]) -> str:
    lines = [f"{'kind':<6}{'backend':<10}{'ms/fit':>10}{'repeats':>9}"]
    by_kind: dict[str, dict[str, float]] = {}
    for r in results:
        lines.append(f"{r.kind:<6}{r.backend:<10}{r.ms_per_fit:>10.2f}{r.repeats:>9}")
        by_kind.setdefault(r.kind, {})[r.backend] = r.ms_per_fit
    for kind, t in by_kind.items():
        if "compiled" in t and "numpy" in t:
            lines.append(f"{kind}: compiled is {t['numpy'] / t['compiled']:.1f}x faster")
    return "\n".join(lines)
