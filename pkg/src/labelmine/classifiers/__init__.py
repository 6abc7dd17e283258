"""Interchangeable classifiers behind one fit/predict contract.

All kinds are trained from scratch per call, deterministically under the
supplied seed, and are cheap enough to be fitted hundreds of thousands of
times per experiment grid.  CENTROID is a deterministic nearest-centroid
model used by oracle tests; it is not part of the experiment grid.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from ..codes import as_code, label_accuracy
from ..dataset import LabeledSet
from .backend import active_backend, get_kernels, kernels

# MLP: deliberately small and shallow so a fit costs milliseconds.  The
# step size is the largest that trains stably in 30 full-batch epochs;
# smaller steps leave the net near its random initialization.
MLP_HIDDEN = 32
MLP_EPOCHS = 30
MLP_LR = 0.2
# Linear one-vs-rest SVM, batch subgradient steps.
SVM_EPOCHS = 20
SVM_LR = 0.1
SVM_L2 = 1e-3
# Random forest.
RF_TREES = 25
RF_MAX_DEPTH = 8


class ClassifierKind(Enum):
    MLP = "nn"
    SVM = "svm"
    RF = "rf"
    CENTROID = "centroid"

    @classmethod
    def from_name(cls, name: str) -> "ClassifierKind":
        key = name.strip().lower()
        aliases = {"nn": cls.MLP, "mlp": cls.MLP, "ann": cls.MLP}
        if key in aliases:
            return aliases[key]
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown classifier {name!r}; expected nn, svm, rf or centroid")


@dataclass(frozen=True)
class TrainedModel:
    """Immutable fitted classifier; `params` arrays are read-only."""

    kind: ClassifierKind
    num_classes: int
    feature_width: int
    params: Mapping[str, np.ndarray]


def _freeze(params: dict) -> dict:
    for arr in params.values():
        if isinstance(arr, np.ndarray):
            arr.setflags(write=False)
    return params


# Engines fit thousands of models on the same feature matrix; cache the
# float32 cast and the byte-quantization of each distinct source array.
_PREP_CACHE: dict = {}


def _prepared(features: np.ndarray):
    """(float32 C-order view, uint8 levels or None) for a feature matrix.

    The uint8 matrix is returned only when every value sits exactly on the
    k/255 grid (true for IDX-ingested images); the forest kernel then takes
    a counting-sort fast path with identical results.
    """
    key = id(features)
    hit = _PREP_CACHE.get(key)
    if hit is not None and hit[0]() is features:
        return hit[1], hit[2]
    Xf = np.ascontiguousarray(features, dtype=np.float32)
    k = np.rint(np.asarray(features, dtype=np.float64) * 255.0)
    Xq = None
    if k.size and k.min() >= 0 and k.max() <= 255:
        if np.array_equal((k / 255.0).astype(np.float32), Xf):
            Xq = np.ascontiguousarray(k, dtype=np.uint8)
    if len(_PREP_CACHE) > 64:
        _PREP_CACHE.clear()
    _PREP_CACHE[key] = (weakref.ref(features), Xf, Xq)
    return Xf, Xq


def fit(
    kind: ClassifierKind,
    features: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    seed: int,
) -> TrainedModel:
    """Train a fresh model of `kind` on (features, labels).

    Classes absent from `labels` are allowed: they simply get no positive
    examples.  Identical inputs and seed give identical models.
    """
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError(f"training features must be a nonempty 2-D matrix, got shape {features.shape}")
    y = as_code(labels, num_classes)
    n, d = features.shape
    if y.shape[0] != n:
        raise ValueError(f"{y.shape[0]} labels for {n} training rows")
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")

    if kind is ClassifierKind.CENTROID:
        params = _centroid_fit(features.astype(np.float64), y, num_classes)
        return TrainedModel(kind, num_classes, d, _freeze(params))

    X, Xq = _prepared(features)
    y32 = y.astype(np.int32)

    if kind is ClassifierKind.MLP:
        rng = np.random.default_rng(seed)
        W1 = rng.standard_normal((d, MLP_HIDDEN), dtype=np.float32)
        W1 *= np.float32(1.0 / math.sqrt(d))
        W2 = rng.standard_normal((MLP_HIDDEN, num_classes), dtype=np.float32)
        W2 *= np.float32(1.0 / math.sqrt(MLP_HIDDEN))
        b1 = np.zeros(MLP_HIDDEN, dtype=np.float32)
        b2 = np.zeros(num_classes, dtype=np.float32)
        kernels.mlp_train(X, y32, W1, b1, W2, b2, MLP_EPOCHS, MLP_LR)
        params = {"W1": W1, "b1": b1, "W2": W2, "b2": b2}
    elif kind is ClassifierKind.SVM:
        W = np.zeros((d, num_classes), dtype=np.float32)
        b = np.zeros(num_classes, dtype=np.float32)
        kernels.svm_train(X, y32, W, b, SVM_EPOCHS, SVM_LR, SVM_L2)
        params = {"W": W, "b": b}
    elif kind is ClassifierKind.RF:
        mtry = max(1, min(d, round(math.sqrt(d))))
        state = np.random.SeedSequence(seed).generate_state(2 * RF_TREES).astype(np.uint64)
        tree_seeds = (state[::2] << np.uint64(32)) | state[1::2]
        params = kernels.rf_build(
            X, y32, num_classes, RF_TREES, RF_MAX_DEPTH, mtry, True, tree_seeds, Xq
        )
    else:
        raise ValueError(f"unknown classifier kind {kind}")
    return TrainedModel(kind, num_classes, d, _freeze(params))


def _centroid_fit(X: np.ndarray, y: np.ndarray, num_classes: int) -> dict:
    centroids = np.zeros((num_classes, X.shape[1]), dtype=np.float64)
    present = np.zeros(num_classes, dtype=bool)
    for c in range(num_classes):
        block = X[y == c]
        if block.shape[0]:
            # Column-sorting before the sum makes the mean a function of the
            # row multiset only, so row order can never change the model.
            block = np.sort(block, axis=0)
            centroids[c] = block.sum(axis=0) / block.shape[0]
            present[c] = True
    return {"centroids": centroids, "present": present}


def predict(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    """Class index in [0, C) for every feature row; pure and repeatable."""
    X = np.asarray(features)
    if X.ndim != 2 or X.shape[1] != model.feature_width:
        raise ValueError(
            f"feature shape {X.shape} incompatible with trained width {model.feature_width}"
        )
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    p = model.params
    if model.kind is ClassifierKind.MLP:
        Xf, _ = _prepared(X)
        H = np.maximum(Xf @ p["W1"] + p["b1"], 0)
        return np.argmax(H @ p["W2"] + p["b2"], axis=1).astype(np.int64)
    if model.kind is ClassifierKind.SVM:
        Xf, _ = _prepared(X)
        return np.argmax(Xf @ p["W"] + p["b"], axis=1).astype(np.int64)
    if model.kind is ClassifierKind.RF:
        Xf, _ = _prepared(X)
        return np.asarray(kernels.rf_predict(p, Xf), dtype=np.int64)
    if model.kind is ClassifierKind.CENTROID:
        Xd = np.asarray(X, dtype=np.float64)
        mu = p["centroids"]
        scores = -2.0 * (Xd @ mu.T) + np.einsum("cd,cd->c", mu, mu)
        scores[:, ~p["present"]] = np.inf
        return np.argmin(scores, axis=1).astype(np.int64)
    raise ValueError(f"unknown classifier kind {model.kind}")


def validation_accuracy(model: TrainedModel, val: LabeledSet) -> float:
    """Accuracy of `model` on a ground-truth labeled set."""
    return label_accuracy(predict(model, val.features), val.labels)


__all__ = [
    "ClassifierKind",
    "TrainedModel",
    "fit",
    "predict",
    "validation_accuracy",
    "active_backend",
    "get_kernels",
]
