"""Dataset ingestion: IDX files, balanced experiment splits, synthetic sets.

The IDX container is the big-endian binary layout used by the MNIST
distribution (magic 2051 for image tensors, 2049 for label vectors).
Parsing is bit-exact: serializing a parsed file reproduces its bytes.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codes import CODE_DTYPE, as_code
from .seeding import rng_from

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


class IdxFormatError(ValueError):
    """Malformed IDX payload (bad magic, bad counts, truncation)."""


@dataclass(frozen=True)
class LabeledSet:
    """Feature matrix plus its ground-truth labeling code."""

    features: np.ndarray  # (rows, cols) floats in [0, 1]
    labels: np.ndarray  # (rows,) int64 in [0, num_classes)
    num_classes: int = 10

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"labels length {self.labels.shape} does not match "
                f"{self.features.shape[0]} feature rows"
            )
        as_code(self.labels, self.num_classes)

    def __len__(self) -> int:
        return self.features.shape[0]

    def take(self, indices: np.ndarray) -> "LabeledSet":
        return LabeledSet(self.features[indices], self.labels[indices], self.num_classes)


@dataclass(frozen=True)
class ExperimentSplit:
    """Disjoint train/validation pair drawn from one source set."""

    train: LabeledSet
    validation: LabeledSet
    train_indices: np.ndarray | None = field(default=None, repr=False)
    val_indices: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.train.num_classes != self.validation.num_classes:
            raise ValueError("train and validation class counts differ")
        if self.train.features.shape[1] != self.validation.features.shape[1]:
            raise ValueError("train and validation feature widths differ")
        if self.train_indices is not None and self.val_indices is not None:
            if np.intersect1d(self.train_indices, self.val_indices).size:
                raise ValueError("train and validation index sets overlap")

    @property
    def num_classes(self) -> int:
        return self.train.num_classes


def _maybe_gunzip(data: bytes) -> bytes:
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX image tensor into an (n, rows*cols) matrix in [0, 1]."""
    data = _maybe_gunzip(data)
    if len(data) < 16:
        raise IdxFormatError(f"image header needs 16 bytes, got {len(data)}")
    magic, n, rows, cols = struct.unpack(">iiii", data[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"bad image magic {magic}, expected {IMAGE_MAGIC}")
    if n < 0 or rows < 1 or cols < 1:
        raise IdxFormatError(f"bad image counts n={n} rows={rows} cols={cols}")
    expected = 16 + n * rows * cols
    if len(data) != expected:
        raise IdxFormatError(f"image payload is {len(data)} bytes, expected {expected}")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def parse_idx_labels(data: bytes, num_classes: int = 10) -> np.ndarray:
    """Parse an IDX label vector into an int64 labeling code."""
    data = _maybe_gunzip(data)
    if len(data) < 8:
        raise IdxFormatError(f"label header needs 8 bytes, got {len(data)}")
    magic, n = struct.unpack(">ii", data[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"bad label magic {magic}, expected {LABEL_MAGIC}")
    if n < 0:
        raise IdxFormatError(f"bad label count {n}")
    if len(data) != 8 + n:
        raise IdxFormatError(f"label payload is {len(data)} bytes, expected {8 + n}")
    labels = np.frombuffer(data, dtype=np.uint8, offset=8)
    if labels.size and labels.max() >= num_classes:
        raise IdxFormatError(
            f"label value {int(labels.max())} outside [0, {num_classes})"
        )
    return labels.astype(CODE_DTYPE)


def serialize_idx_images(matrix: np.ndarray, rows: int = 28, cols: int = 28) -> bytes:
    """Inverse of parse_idx_images (bit-exact for byte-quantized inputs)."""
    n, width = matrix.shape
    if rows * cols != width:
        raise ValueError(f"rows*cols {rows * cols} != feature width {width}")
    pixels = np.rint(np.asarray(matrix) * 255.0).astype(np.uint8)
    return struct.pack(">iiii", IMAGE_MAGIC, n, rows, cols) + pixels.tobytes()


def serialize_idx_labels(labels: np.ndarray) -> bytes:
    """Inverse of parse_idx_labels."""
    labels = np.asarray(labels)
    return struct.pack(">ii", LABEL_MAGIC, labels.shape[0]) + labels.astype(
        np.uint8
    ).tobytes()


def _read_file(path: Path) -> bytes:
    return Path(path).read_bytes()


def resolve_idx_path(directory: Path, stem: str) -> Path:
    """Find `stem` or `stem.gz` under `directory`."""
    directory = Path(directory)
    for name in (stem, stem + ".gz"):
        p = directory / name
        if p.exists():
            return p
    raise FileNotFoundError(
        f"missing IDX file: looked for {directory / stem} and {directory / (stem + '.gz')}"
    )


def load_labeled_dir(directory: Path, which: str = "train", num_classes: int = 10) -> LabeledSet:
    """Load the standard image/label file pair from a data directory."""
    stems = {
        "train": (TRAIN_IMAGES, TRAIN_LABELS),
        "test": (TEST_IMAGES, TEST_LABELS),
    }
    if which not in stems:
        raise ValueError(f"which must be 'train' or 'test', got {which!r}")
    img_stem, lab_stem = stems[which]
    features = parse_idx_images(_read_file(resolve_idx_path(directory, img_stem)))
    labels = parse_idx_labels(_read_file(resolve_idx_path(directory, lab_stem)), num_classes)
    if labels.shape[0] != features.shape[0]:
        raise IdxFormatError(
            f"{which}: {features.shape[0]} images but {labels.shape[0]} labels"
        )
    return LabeledSet(features, labels, num_classes)


def sample_split(
    source: LabeledSet,
    train_size: int,
    val_size: int,
    seed: int,
) -> ExperimentSplit:
    """Draw a class-balanced train set and a near-balanced validation set.

    The train set gets exactly train_size/C rows per class; the validation
    set per-class counts differ by at most one, with the classes receiving
    an extra seat chosen by the seed.  All rows are drawn without
    replacement and the two index sets are disjoint.
    """
    c = source.num_classes
    if train_size % c != 0:
        raise ValueError(f"train_size {train_size} not divisible by {c} classes")
    per_class_train = train_size // c
    base_val, extra = divmod(val_size, c)

    rng = rng_from(seed)
    extra_classes = set(rng.choice(c, size=extra, replace=False).tolist()) if extra else set()

    train_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    for cls in range(c):
        pool = np.flatnonzero(source.labels == cls)
        want = per_class_train + base_val + (1 if cls in extra_classes else 0)
        if pool.size < want:
            raise ValueError(
                f"class {cls} has {pool.size} instances, needs {want} for the split"
            )
        picked = rng.choice(pool, size=want, replace=False)
        train_parts.append(picked[:per_class_train])
        val_parts.append(picked[per_class_train:])

    train_idx = np.sort(np.concatenate(train_parts))
    val_idx = np.sort(np.concatenate(val_parts))
    return ExperimentSplit(
        train=source.take(train_idx),
        validation=source.take(val_idx),
        train_indices=train_idx,
        val_indices=val_idx,
    )


def make_synthetic(
    num_instances: int,
    num_classes: int,
    num_features: int,
    separation: float,
    seed: int,
) -> LabeledSet:
    """Balanced synthetic point clouds, one cluster per class.

    Class c sits at separation * unit-axis (c mod D) plus uniform noise of
    half-width 1; everything is rescaled into [0, 1] by a single affine map,
    which preserves the cluster geometry.  With separation >= 10 the classes
    are linearly separable by a wide margin.
    """
    if num_instances < num_classes:
        raise ValueError(
            f"need at least one instance per class ({num_instances} < {num_classes})"
        )
    if separation <= 0:
        raise ValueError(f"separation must be positive, got {separation}")
    rng = rng_from(seed)
    counts = np.full(num_classes, num_instances // num_classes)
    counts[: num_instances % num_classes] += 1
    labels = np.repeat(np.arange(num_classes, dtype=CODE_DTYPE), counts)
    points = rng.uniform(-1.0, 1.0, size=(num_instances, num_features))
    points[np.arange(num_instances), labels % num_features] += separation
    order = rng.permutation(num_instances)
    points, labels = points[order], labels[order]
    lo = -1.0
    hi = separation + 1.0
    features = (points - lo) / (hi - lo)
    return LabeledSet(features, labels, num_classes)


def make_synthetic_split(
    num_instances: int,
    num_classes: int,
    num_features: int,
    separation: float,
    seed: int,
    val_size: int = 30,
) -> ExperimentSplit:
    """Synthetic train/validation pair for oracle and engine tests."""
    train = make_synthetic(num_instances, num_classes, num_features, separation, seed)
    validation = make_synthetic(val_size, num_classes, num_features, separation, seed + 1)
    return ExperimentSplit(train=train, validation=validation)
