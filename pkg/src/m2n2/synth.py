"""Synthetic digit images for offline runs.

Renders seven-segment-style glyphs for the digits 0..9 on a 28x28 canvas
with random affine jitter, per-segment brightness, occasional segment
dropout and pixel noise, then packs them in the same layout the IDX loaders
produce.  The generator is fully deterministic given a seed, which lets the
test and acceptance suites run without the real MNIST files; pass real IDX
paths to the CLI or loaders whenever they are available.
"""

from __future__ import annotations

import numpy as np

from .data import LabeledDataset, NUM_CLASSES

ROWS = 28
COLS = 28

# Segment endpoints in a [0,1]^2 glyph frame, y pointing down.
_SEGMENTS = {
    "A": ((0.18, 0.10), (0.82, 0.10)),
    "B": ((0.82, 0.10), (0.82, 0.50)),
    "C": ((0.82, 0.50), (0.82, 0.90)),
    "D": ((0.18, 0.90), (0.82, 0.90)),
    "E": ((0.18, 0.50), (0.18, 0.90)),
    "F": ((0.18, 0.10), (0.18, 0.50)),
    "G": ((0.18, 0.50), (0.82, 0.50)),
}

_DIGIT_SEGMENTS = {
    0: "ABCDEF",
    1: "BC",
    2: "ABGED",
    3: "ABGCD",
    4: "FGBC",
    5: "AFGCD",
    6: "AFGEDC",
    7: "ABC",
    8: "ABCDEFG",
    9: "ABCDFG",
}

_PIXEL_CENTERS = np.stack(
    np.meshgrid(
        (np.arange(COLS) + 0.5) / COLS,
        (np.arange(ROWS) + 0.5) / ROWS,
    ),
    axis=-1,
).reshape(-1, 2)  # (784, 2) as (x, y)


def _segment_distance(points: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = q - p
    denom = float(d @ d)
    t = np.clip((points - p) @ d / denom, 0.0, 1.0)
    closest = p + t[:, None] * d
    return np.linalg.norm(points - closest, axis=1)


def _render_one(digit: int, rng: np.random.Generator, *, stroke: float,
                jitter: float, drop_prob: float) -> np.ndarray:
    theta = rng.uniform(-0.30, 0.30) * jitter
    shear = rng.uniform(-0.25, 0.25) * jitter
    sx = 1.0 + rng.uniform(-0.22, 0.22) * jitter
    sy = 1.0 + rng.uniform(-0.22, 0.22) * jitter
    shift = rng.uniform(-0.10, 0.10, size=2) * jitter

    cos_t, sin_t = np.cos(theta), np.sin(theta)
    fwd = np.array([[cos_t, -sin_t], [sin_t, cos_t]]) @ np.array([[sx, shear * sx], [0.0, sy]])
    inv = np.linalg.inv(fwd)
    glyph_pts = (_PIXEL_CENTERS - 0.5 - shift) @ inv.T + 0.5

    active = list(_DIGIT_SEGMENTS[digit])
    if len(active) > 2 and rng.uniform() < drop_prob:
        del active[int(rng.integers(len(active)))]

    image = np.zeros(_PIXEL_CENTERS.shape[0])
    for name in active:
        p, q = (np.asarray(end) for end in _SEGMENTS[name])
        dist = _segment_distance(glyph_pts, p, q)
        brightness = rng.uniform(0.65, 1.0)
        image = np.maximum(image, brightness * np.clip((stroke - dist) / 0.02, 0.0, 1.0))
    return image


def make_digits(
    n: int,
    seed,
    *,
    stroke: float = 0.075,
    jitter: float = 0.6,
    drop_prob: float = 0.05,
    noise: float = 0.08,
) -> tuple[np.ndarray, np.ndarray]:
    """Generate ``n`` glyph images; returns uint8 pixels ``(n, 784)`` and labels.

    Labels are balanced (counts differ by at most one) and shuffled.
    """
    if n < 1:
        raise ValueError(f"sample count {n} must be positive")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % NUM_CLASSES
    rng.shuffle(labels)
    pixels = np.empty((n, ROWS * COLS), dtype=np.uint8)
    for i, digit in enumerate(labels):
        image = _render_one(int(digit), rng, stroke=stroke, jitter=jitter, drop_prob=drop_prob)
        image = image * rng.uniform(0.8, 1.0)
        image = image + rng.normal(0.0, noise, size=image.shape)
        pixels[i] = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    return pixels, labels.astype(np.int64)


def make_dataset(n: int, seed, **style) -> LabeledDataset:
    """Generate a :class:`LabeledDataset` exactly as the IDX loaders would."""
    pixels, labels = make_digits(n, seed, **style)
    images = pixels.astype(np.float32) / np.float32(255.0)
    return LabeledDataset(images=images, labels=labels)
