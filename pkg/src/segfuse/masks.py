"""Binary masks, run-length codec, overlap and in-mask score statistics.

Masks are stored as uncompressed run-length counts over a column-major
scan (pixel ``(x, y)`` sits at scan index ``x * height + y``). Counts
alternate zeros and ones, starting with zeros; only the first count may
be 0. Dense arrays are always shaped ``(height, width)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyMask,
    InvariantViolation,
    LengthMismatch,
    NegativeCount,
    ScoreOutOfRange,
    ZeroLengthRun,
)


def validate_counts(counts: Sequence[int], width: int, height: int) -> None:
    total = 0
    for i, c in enumerate(counts):
        if c < 0:
            raise NegativeCount(f"run {i} has negative length {c}")
        if c == 0 and i > 0:
            raise ZeroLengthRun(f"run {i} has zero length; only the first run may be empty")
        total += c
    if total != width * height:
        raise LengthMismatch(
            f"run lengths sum to {total}, expected {width}x{height}={width * height}"
        )


def rle_decode(counts: Sequence[int], width: int, height: int) -> np.ndarray:
    """Decode run-length counts into a boolean ``(height, width)`` array."""
    counts = [int(c) for c in counts]
    validate_counts(counts, width, height)
    values = np.arange(len(counts), dtype=np.int64) % 2 == 1
    flat = np.repeat(values, counts)
    return flat.reshape(width, height).T.copy()


def rle_encode(bitmap: np.ndarray) -> list[int]:
    """Encode a ``(height, width)`` array as canonical run-length counts."""
    bitmap = np.asarray(bitmap, dtype=bool)
    if bitmap.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D bitmap, got shape {bitmap.shape}")
    flat = bitmap.T.ravel()
    if flat.size == 0:
        return []
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return counts


@dataclass(frozen=True)
class BinaryMask:
    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if self.width < 0 or self.height < 0:
            raise InvariantViolation(f"negative mask size {self.width}x{self.height}")
        object.__setattr__(self, "runs", tuple(int(c) for c in self.runs))
        validate_counts(self.runs, self.width, self.height)

    @classmethod
    def from_array(cls, bitmap: np.ndarray) -> "BinaryMask":
        bitmap = np.asarray(bitmap, dtype=bool)
        height, width = bitmap.shape
        return cls(width, height, tuple(rle_encode(bitmap)))

    @classmethod
    def from_rect(cls, width: int, height: int, x0: int, y0: int, x1: int, y1: int) -> "BinaryMask":
        """Mask with ones on the half-open rectangle ``[x0, x1) x [y0, y1)``."""
        bitmap = np.zeros((height, width), dtype=bool)
        bitmap[y0:y1, x0:x1] = True
        return cls.from_array(bitmap)

    @cached_property
    def array(self) -> np.ndarray:
        bitmap = rle_decode(self.runs, self.width, self.height)
        bitmap.flags.writeable = False
        return bitmap

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def area(self) -> int:
        return sum(self.runs[1::2])

    @property
    def bbox(self) -> tuple[int, int, int, int] | None:
        """Inclusive ``(x_min, y_min, x_max, y_max)`` of the one-pixels."""
        ys, xs = np.nonzero(self.array)
        if xs.size == 0:
            return None
        return (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """Per-pixel person-class scores in ``[0, 1]``, shaped ``(height, width)``."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionMismatch(f"score map must be 2-D, got shape {values.shape}")
        if values.size and not (np.all(values >= 0.0) and np.all(values <= 1.0)):
            raise ScoreOutOfRange("score map values must lie in [0, 1]")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, width: int, height: int, value: float) -> "ScoreMap":
        return cls(np.full((height, width), value, dtype=np.float64))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _check_same_shape(a, b, what="masks"):
    if a.shape != b.shape:
        raise DimensionMismatch(
            f"{what} differ in size: {a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}"
        )


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; 0.0 when both masks are empty."""
    _check_same_shape(a, b)
    inter = int(np.count_nonzero(a.array & b.array))
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def iou_matrix(preds: Sequence[BinaryMask], gts: Sequence[BinaryMask]) -> np.ndarray:
    """Pairwise IoU, shape ``(len(preds), len(gts))``."""
    out = np.zeros((len(preds), len(gts)), dtype=np.float64)
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            out[i, j] = mask_iou(p, g)
    return out


def mean_score_in_mask(mask: BinaryMask, score_map: ScoreMap) -> float:
    """Arithmetic mean of ``score_map`` over the one-pixels of ``mask``."""
    _check_same_shape(mask, score_map, "mask and score map")
    if mask.area == 0:
        raise EmptyMask("cannot average a score map over an empty mask")
    inside = score_map.values[mask.array]
    mean = float(inside.sum()) / inside.size
    # keep the mean inside the range of its samples despite rounding
    return min(max(mean, float(inside.min())), float(inside.max()))
