"""Flat-parameter-vector algebra.

Models are treated as 1-D float vectors throughout: spherical interpolation,
split-point merging, segmented (chromosome-style) merging and Gaussian
mutation all operate on the flattened weights, so they compose with any
architecture that can be flattened.  Vectors live in float64 in memory and
are persisted as little-endian float32 (see :func:`save_params`).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

MAGIC = b"M2N2"
FORMAT_VERSION = 1

# The spherical formula is singular for (anti)parallel or near-zero vectors;
# below these thresholds the linear limit is used instead.
SIN_OMEGA_FLOOR = 1e-6
NORM_FLOOR = 1e-12


def _as_vector(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D parameter vector, got shape {arr.shape}")
    return arr


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def slerp(a, b, t: float) -> np.ndarray:
    """Spherical linear interpolation between two parameter vectors.

    Interpolates along the great circle through ``a`` and ``b``, with the
    angle computed over the full flattened vectors.  ``t=0`` returns ``a``
    and ``t=1`` returns ``b`` exactly.  Falls back to linear interpolation
    when the vectors are (anti)parallel or one has near-zero norm.
    """
    a = _as_vector(a)
    b = _as_vector(b)
    _check_same_dim(a, b)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter t={t} outside [0, 1]")
    if a.shape[0] == 0:
        return a.copy()

    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a < NORM_FLOOR or norm_b < NORM_FLOOR:
        return (1.0 - t) * a + t * b

    cos_omega = float(np.dot(a, b)) / (norm_a * norm_b)
    cos_omega = min(1.0, max(-1.0, cos_omega))
    omega = np.arccos(cos_omega)
    sin_omega = np.sin(omega)
    if abs(sin_omega) < SIN_OMEGA_FLOOR:
        return (1.0 - t) * a + t * b
    return (np.sin((1.0 - t) * omega) / sin_omega) * a + (np.sin(t * omega) / sin_omega) * b


@dataclass(frozen=True)
class SegmentSpec:
    """Merge parameters for one contiguous index range ``[start, end)``.

    ``w_s`` is the split index local to the segment, in ``[0, end - start]``.
    """

    start: int
    end: int
    w_m: float
    w_s: int

    def validate(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"invalid segment range [{self.start}, {self.end})")
        if not 0.0 <= self.w_m <= 1.0:
            raise ValueError(f"mixing ratio w_m={self.w_m} outside [0, 1]")
        if not 0 <= self.w_s <= self.end - self.start:
            raise ValueError(
                f"split index w_s={self.w_s} outside [0, {self.end - self.start}]"
            )


@dataclass(frozen=True)
class MergeSpec:
    """Mixing ratio and split point for a two-parent merge.

    In the default mode ``w_m`` is the mixing ratio and ``w_s`` the split
    index over the whole vector.  In chromosome mode ``segments`` carries one
    ``(w_m, w_s)`` pair per contiguous segment; the segments must be disjoint
    and cover ``[0, D)``.
    """

    w_m: float = 0.5
    w_s: int = 0
    segments: tuple[SegmentSpec, ...] | None = None

    def validate(self, dim: int) -> None:
        if self.segments is None:
            if not 0.0 <= self.w_m <= 1.0:
                raise ValueError(f"mixing ratio w_m={self.w_m} outside [0, 1]")
            if not 0 <= self.w_s <= dim:
                raise ValueError(f"split index w_s={self.w_s} outside [0, {dim}]")
            return
        if not self.segments:
            raise ValueError("chromosome mode requires at least one segment")
        cursor = 0
        for seg in self.segments:
            seg.validate()
            if seg.start != cursor:
                raise ValueError(
                    f"segments must be contiguous: expected start {cursor}, got {seg.start}"
                )
            cursor = seg.end
        if cursor != dim:
            raise ValueError(f"segments cover [0, {cursor}) but the vector has {dim} entries")


def merge_split(a, b, spec: MergeSpec) -> np.ndarray:
    """Split-point merge of two parameter vectors.

    The vector is cut at ``spec.w_s``; the prefix is spherically interpolated
    with ratio ``w_m`` and the suffix with the complementary ratio ``1-w_m``,
    each with its own interpolation angle.  ``w_m=0`` keeps the first parent
    in the prefix and the second in the suffix.
    """
    a = _as_vector(a)
    b = _as_vector(b)
    _check_same_dim(a, b)
    if spec.segments is not None:
        raise ValueError("spec has segments; use merge_segments")
    spec.validate(a.shape[0])
    ws = spec.w_s
    return np.concatenate(
        [slerp(a[:ws], b[:ws], spec.w_m), slerp(a[ws:], b[ws:], 1.0 - spec.w_m)]
    )


def merge_segments(a, b, spec: MergeSpec) -> np.ndarray:
    """Chromosome-style merge: apply :func:`merge_split` per segment.

    Each segment is merged independently with its own ``(w_m, w_s)`` and the
    results are concatenated in index order.
    """
    a = _as_vector(a)
    b = _as_vector(b)
    _check_same_dim(a, b)
    if spec.segments is None:
        raise ValueError("spec has no segments; use merge_split")
    spec.validate(a.shape[0])
    parts = []
    for seg in spec.segments:
        sub = MergeSpec(w_m=seg.w_m, w_s=seg.w_s)
        parts.append(merge_split(a[seg.start : seg.end], b[seg.start : seg.end], sub))
    return np.concatenate(parts)


def merge(a, b, spec: MergeSpec) -> np.ndarray:
    """Dispatch to :func:`merge_segments` when the spec carries segments."""
    if spec.segments is not None:
        return merge_segments(a, b, spec)
    return merge_split(a, b, spec)


def mutate_gaussian(a, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. ``Normal(0, sigma^2)`` noise to every entry."""
    a = _as_vector(a)
    if sigma <= 0.0:
        raise ValueError(f"sigma={sigma} must be positive")
    return a + rng.normal(0.0, sigma, size=a.shape[0])


def sample_merge_spec(
    rng: np.random.Generator,
    dim: int,
    segments: list[tuple[int, int]] | None = None,
) -> MergeSpec:
    """Draw a random merge spec: ``w_m ~ U[0,1]`` and ``w_s ~ U{0..len}``.

    With ``segments`` (a partition of ``[0, dim)`` as ``(start, end)`` pairs)
    an independent ``(w_m, w_s)`` is drawn per segment.
    """
    if dim < 1:
        raise ValueError(f"dimension {dim} must be at least 1")
    if segments is None:
        w_m = float(rng.uniform(0.0, 1.0))
        w_s = int(rng.integers(0, dim + 1))
        return MergeSpec(w_m=w_m, w_s=w_s)
    drawn = []
    for start, end in segments:
        length = end - start
        if length <= 0:
            raise ValueError(f"invalid segment range [{start}, {end})")
        w_m = float(rng.uniform(0.0, 1.0))
        w_s = int(rng.integers(0, length + 1))
        drawn.append(SegmentSpec(start=start, end=end, w_m=w_m, w_s=w_s))
    spec = MergeSpec(segments=tuple(drawn))
    spec.validate(dim)
    return spec


def save_params(path, values) -> None:
    """Persist a parameter vector to the binary model format.

    Layout: magic ``M2N2``, format version (u16 LE), dimension (u64 LE), then
    the entries as consecutive little-endian IEEE-754 float32.
    """
    arr = _as_vector(values)
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to save non-finite parameters")
    payload = arr.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<Q", arr.shape[0]))
        fh.write(payload)


def load_params(path) -> np.ndarray:
    """Load a parameter vector saved by :func:`save_params` (as float64)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header = 4 + 2 + 8
    if len(blob) < header or blob[:4] != MAGIC:
        raise DataFormatError(f"{path}: not a parameter-vector file (bad magic)")
    (version,) = struct.unpack("<H", blob[4:6])
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported format version {version}")
    (dim,) = struct.unpack("<Q", blob[6:14])
    expected = header + 4 * dim
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: payload has {len(blob) - header} bytes, expected {4 * dim}"
        )
    values = np.frombuffer(blob, dtype="<f4", offset=header).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise DataFormatError(f"{path}: non-finite parameter entries")
    return values
