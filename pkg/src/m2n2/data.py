"""IDX ingestion, deterministic subsetting and digit filtering.

The loaders accept the MNIST distribution format (big-endian IDX, optionally
gzip-compressed) and produce in-memory datasets with pixels scaled to
``[0, 1]``.  Writers reproduce the uncompressed byte stream exactly, so a
parsed file can be round-tripped bit for bit.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
NUM_CLASSES = 10


@dataclass(frozen=True)
class LabeledDataset:
    """Images as an ``(N, pixels)`` float array in [0, 1] plus integer labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.ndim != 2:
            raise ValueError(f"images must be 2-D, got shape {self.images.shape}")
        if self.labels.ndim != 1:
            raise ValueError(f"labels must be 1-D, got shape {self.labels.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("pixel values outside [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise ValueError(f"labels outside 0..{NUM_CLASSES - 1}")

    def __len__(self) -> int:
        return self.images.shape[0]


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        rest = fh.read()
    blob = head + rest
    if head == b"\x1f\x8b":
        blob = gzip.decompress(blob)
    return blob


def load_idx_images(path) -> np.ndarray:
    """Parse an IDX3 image file into a ``(count, rows*cols)`` uint8 array."""
    blob = _read_bytes(path)
    if len(blob) < 16:
        raise DataFormatError(f"{path}: truncated IDX image header")
    magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != IMAGES_MAGIC:
        raise DataFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")
    expected = 16 + count * rows * cols
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: payload has {len(blob) - 16} bytes, expected {count * rows * cols}"
        )
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols).copy()


def load_idx_labels(path) -> np.ndarray:
    """Parse an IDX1 label file into a ``(count,)`` int64 array in 0..9."""
    blob = _read_bytes(path)
    if len(blob) < 8:
        raise DataFormatError(f"{path}: truncated IDX label header")
    magic, count = struct.unpack(">II", blob[:8])
    if magic != LABELS_MAGIC:
        raise DataFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}")
    if len(blob) != 8 + count:
        raise DataFormatError(f"{path}: payload has {len(blob) - 8} bytes, expected {count}")
    labels = np.frombuffer(blob, dtype=np.uint8, offset=8)
    if labels.size and labels.max() >= NUM_CLASSES:
        raise DataFormatError(f"{path}: label byte {labels.max()} outside 0..{NUM_CLASSES - 1}")
    return labels.astype(np.int64)


def save_idx_images(path, pixels: np.ndarray, rows: int = 28, cols: int = 28) -> None:
    """Write a ``(count, rows*cols)`` uint8 array in IDX3 layout."""
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if pixels.ndim != 2 or pixels.shape[1] != rows * cols:
        raise ValueError(f"pixels shape {pixels.shape} does not match {rows}x{cols}")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, pixels.shape[0], rows, cols))
        fh.write(pixels.tobytes())


def save_idx_labels(path, labels: np.ndarray) -> None:
    """Write a label array in IDX1 layout."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
        raise ValueError(f"labels outside 0..{NUM_CLASSES - 1}")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.astype(np.uint8).tobytes())


def load_dataset(images_path, labels_path) -> LabeledDataset:
    """Load an image/label IDX pair into a dataset with pixels in [0, 1]."""
    pixels = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{pixels.shape[0]} images in {images_path} but {labels.shape[0]} labels"
        )
    images = pixels.astype(np.float32) / np.float32(255.0)
    return LabeledDataset(images=images, labels=labels)


def save_dataset(dataset: LabeledDataset, images_path, labels_path,
                 rows: int = 28, cols: int = 28) -> None:
    """Write a dataset back to an IDX pair, undoing the [0, 1] scaling."""
    pixels = np.round(dataset.images.astype(np.float64) * 255.0).astype(np.uint8)
    save_idx_images(images_path, pixels, rows=rows, cols=cols)
    save_idx_labels(labels_path, dataset.labels)


def subset(dataset: LabeledDataset, n: int, seed) -> LabeledDataset:
    """Deterministic label-stratified sample of ``n`` examples.

    Per-class counts differ by at most one (up to class availability); the
    selected examples keep their original relative order, which makes the
    operation idempotent: subsetting the result with the same ``n`` and seed
    returns it unchanged.
    """
    total = len(dataset)
    if not 1 <= n <= total:
        raise ValueError(f"subset size {n} outside 1..{total}")
    rng = np.random.default_rng(seed)
    classes = np.unique(dataset.labels)
    counts = {int(c): int(np.sum(dataset.labels == c)) for c in classes}

    base, extra = divmod(n, classes.shape[0])
    quota = {int(c): base for c in classes}
    for k in rng.permutation(classes.shape[0])[:extra]:
        quota[int(classes[k])] += 1

    # Classes short of their quota hand the shortfall to classes with spare
    # capacity, one per pass in ascending label order (keeps it deterministic
    # and reproducible when re-applied to the subset itself).
    shortfall = 0
    for c in quota:
        if quota[c] > counts[c]:
            shortfall += quota[c] - counts[c]
            quota[c] = counts[c]
    while shortfall > 0:
        progressed = False
        for c in sorted(quota):
            if shortfall > 0 and quota[c] < counts[c]:
                quota[c] += 1
                shortfall -= 1
                progressed = True
        if not progressed:  # cannot happen while n <= total
            raise RuntimeError("stratified quota redistribution failed")

    chosen: list[np.ndarray] = []
    for c in sorted(quota):
        idx = np.flatnonzero(dataset.labels == c)
        take = rng.permutation(idx.shape[0])[: quota[c]]
        chosen.append(idx[take])
    order = np.sort(np.concatenate(chosen))
    return LabeledDataset(images=dataset.images[order], labels=dataset.labels[order])


def filter_digits(dataset: LabeledDataset, digits) -> LabeledDataset:
    """Keep exactly the examples whose label is in ``digits``, order preserved."""
    digits = frozenset(int(d) for d in digits)
    if not digits:
        raise ValueError("digit set must be non-empty")
    if not digits <= set(range(NUM_CLASSES)):
        raise ValueError(f"digits {sorted(digits)} outside 0..{NUM_CLASSES - 1}")
    mask = np.isin(dataset.labels, sorted(digits))
    return LabeledDataset(images=dataset.images[mask], labels=dataset.labels[mask])
