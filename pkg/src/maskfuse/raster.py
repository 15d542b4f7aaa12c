"""Binary rasters, probability maps, label maps and the exact distance transform.

Coordinate convention used across the package: ``x`` grows to the right and
``y`` grows downward, with the origin at the top-left pixel.  Planes are
row-major, and every container here is immutable once constructed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import ndimage


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """An immutable binary raster, bit-packed row-major.

    ``bits`` is the ``np.packbits`` encoding of the flattened boolean plane;
    trailing pad bits of the final byte are always zero so that equality can
    compare raw bytes.
    """

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"mask dimensions must be positive, got {self.width}x{self.height}")
        n = self.width * self.height
        expected = (n + 7) // 8
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8).reshape(-1)
        if bits.size != expected:
            raise ValueError(f"expected {expected} packed bytes for {self.width}x{self.height}, got {bits.size}")
        pad = expected * 8 - n
        if pad:
            bits = bits.copy()
            bits[-1] &= (0xFF << pad) & 0xFF  # clear pad bits (packing is MSB-first)
        object.__setattr__(self, "bits", _freeze(bits))

    @classmethod
    def from_array(cls, plane) -> "BinaryMask":
        arr = np.asarray(plane)
        if arr.ndim != 2:
            raise ValueError(f"mask plane must be 2-D, got shape {arr.shape}")
        h, w = arr.shape
        return cls(width=w, height=h, bits=np.packbits(arr.astype(bool).reshape(-1)))

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls.from_array(np.zeros((height, width), dtype=bool))

    @classmethod
    def ones(cls, width: int, height: int) -> "BinaryMask":
        return cls.from_array(np.ones((height, width), dtype=bool))

    @cached_property
    def array(self) -> np.ndarray:
        """The unpacked ``(height, width)`` boolean plane (read-only)."""
        flat = np.unpackbits(self.bits, count=self.width * self.height)
        return _freeze(flat.reshape(self.height, self.width).astype(bool))

    @cached_property
    def count(self) -> int:
        """Number of set pixels."""
        return int(np.unpackbits(self.bits).sum())

    def contains(self, x: int, y: int) -> bool:
        return bool(self.array[y, x])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.bits, other.bits))
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """A per-pixel probability plane with values in [0, 1]."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise ValueError(f"expected values of shape {(self.height, self.width)}, got {vals.shape}")
        if not bool(np.all((vals >= 0.0) & (vals <= 1.0))):
            raise ValueError("probability values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(vals))

    @classmethod
    def from_array(cls, plane) -> "ProbabilityMap":
        arr = np.asarray(plane, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"probability plane must be 2-D, got shape {arr.shape}")
        h, w = arr.shape
        return cls(width=w, height=h, values=arr)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """A per-pixel class-index plane over ``class_count`` classes."""

    width: int
    height: int
    labels: np.ndarray
    background_index: int = 0
    class_count: int = 2

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.shape != (self.height, self.width):
            raise ValueError(f"expected labels of shape {(self.height, self.width)}, got {labels.shape}")
        if self.class_count < 1:
            raise ValueError("class_count must be at least 1")
        if not 0 <= self.background_index < self.class_count:
            raise ValueError(f"background_index {self.background_index} outside [0, {self.class_count})")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError("labels must lie in [0, class_count)")
        object.__setattr__(self, "labels", _freeze(labels))

    @classmethod
    def from_array(cls, plane, background_index: int = 0, class_count: int | None = None) -> "LabelMap":
        arr = np.asarray(plane, dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError(f"label plane must be 2-D, got shape {arr.shape}")
        h, w = arr.shape
        if class_count is None:
            top = int(arr.max()) if arr.size else 0
            class_count = max(top + 1, background_index + 1)
        return cls(width=w, height=h, labels=arr, background_index=background_index, class_count=class_count)

    @classmethod
    def from_mask(cls, mask: BinaryMask, foreground_index: int = 1) -> "LabelMap":
        """Binary mask as a two-class label map (0 = background)."""
        if foreground_index < 1:
            raise ValueError("foreground_index must be >= 1")
        labels = np.where(mask.array, foreground_index, 0)
        return cls(
            width=mask.width,
            height=mask.height,
            labels=labels,
            background_index=0,
            class_count=foreground_index + 1,
        )

    def class_mask(self, index: int) -> BinaryMask:
        """Binary mask of the pixels labelled ``index``."""
        if not 0 <= index < self.class_count:
            raise ValueError(f"class index {index} outside [0, {self.class_count})")
        return BinaryMask.from_array(self.labels == index)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.background_index == other.background_index
            and self.class_count == other.class_count
            and bool(np.array_equal(self.labels, other.labels))
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-pixel Euclidean distance to the nearest pixel outside a region.

    ``squared`` holds exact integer squared distances; ``values`` is their
    square root.  Pixels outside the region are at distance zero.
    """

    width: int
    height: int
    values: np.ndarray
    squared: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        sq = np.ascontiguousarray(self.squared, dtype=np.int64)
        if vals.shape != (self.height, self.width) or sq.shape != (self.height, self.width):
            raise ValueError("distance field planes must match the declared dimensions")
        object.__setattr__(self, "values", _freeze(vals))
        object.__setattr__(self, "squared", _freeze(sq))


def _require_same_dims(a, b, what: str) -> None:
    if a.width != b.width or a.height != b.height:
        raise ValueError(
            f"{what}: dimensions differ ({a.width}x{a.height} vs {b.width}x{b.height})"
        )


def mask_union(masks: Sequence[BinaryMask]) -> BinaryMask:
    """Pixelwise OR of one or more masks of identical dimensions."""
    if not masks:
        raise ValueError("mask_union requires at least one mask")
    first = masks[0]
    bits = first.bits
    for m in masks[1:]:
        _require_same_dims(first, m, "mask_union")
        bits = bits | m.bits
    return BinaryMask(width=first.width, height=first.height, bits=bits)


def mask_difference(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pixels set in ``a`` but not in ``b``."""
    _require_same_dims(a, b, "mask_difference")
    return BinaryMask(width=a.width, height=a.height, bits=a.bits & ~b.bits)


def mask_intersection(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pixels set in both ``a`` and ``b``."""
    _require_same_dims(a, b, "mask_intersection")
    return BinaryMask(width=a.width, height=a.height, bits=a.bits & b.bits)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; two empty masks compare as 1.0."""
    _require_same_dims(a, b, "iou")
    inter = mask_intersection(a, b).count
    union = mask_union([a, b]).count
    if union == 0:
        return 1.0
    return inter / union


def fraction_above(mask: BinaryMask, prob: ProbabilityMap, threshold: float) -> float:
    """Fraction of the mask's pixels whose probability strictly exceeds ``threshold``."""
    _require_same_dims(mask, prob, "fraction_above")
    if mask.count == 0:
        raise ValueError("fraction_above is undefined for an empty mask")
    above = int(np.count_nonzero((prob.values > threshold) & mask.array))
    return above / mask.count


def distance_transform(region: BinaryMask) -> DistanceField:
    """Exact Euclidean distance from each region pixel to the nearest non-region pixel.

    Everything outside the image frame counts as non-region, so values near the
    border are bounded by the distance to the frame.  Squared distances are
    recovered from nearest-neighbour indices and are exact integers.
    """
    plane = np.pad(region.array, 1)  # zero ring: the frame is outside the region
    _, (ny, nx) = ndimage.distance_transform_edt(plane, return_indices=True)
    yy, xx = np.indices(plane.shape)
    sq = (ny.astype(np.int64) - yy) ** 2 + (nx.astype(np.int64) - xx) ** 2
    sq = sq[1:-1, 1:-1]
    return DistanceField(
        width=region.width,
        height=region.height,
        values=np.sqrt(sq.astype(np.float64)),
        squared=sq,
    )
