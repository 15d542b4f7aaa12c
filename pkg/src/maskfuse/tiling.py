"""Grid click layout, sliding-window planning/aggregation, and tile partitioning.

All geometry uses integer arithmetic.  The sampling convention everywhere is
centre-aligned: source index ``floor((2k + 1) * src / (2 * dst))`` for output
index ``k``, which makes integer-factor down/up resampling round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .raster import BinaryMask, ProbabilityMap

Rect = tuple[int, int, int, int]  # (x, y, width, height)


def grid_clicks(width: int, height: int, n: int) -> tuple[tuple[int, int], ...]:
    """An ``n`` x ``n`` grid of click coordinates, centre-aligned, row-major.

    Column ``j`` lands at ``floor((2j + 1) * width / (2n))`` and rows follow the
    same rule vertically, so all clicks are strictly inside the frame.
    """
    if width < 1 or height < 1:
        raise ValueError("grid_clicks needs positive dimensions")
    if n < 1:
        raise ValueError("grid density must be at least 1")
    xs = [((2 * j + 1) * width) // (2 * n) for j in range(n)]
    ys = [((2 * i + 1) * height) // (2 * n) for i in range(n)]
    return tuple((x, y) for y in ys for x in xs)


@dataclass(frozen=True)
class WindowPlan:
    """Square sliding windows covering a plane; the final row/column is clamped flush."""

    width: int
    height: int
    window: int
    stride: int
    rects: tuple[Rect, ...]


@dataclass(frozen=True)
class TilePlan:
    """A disjoint partition of a plane into tiles of at most ``cap`` pixels a side."""

    width: int
    height: int
    cap: int
    rects: tuple[Rect, ...]


def _axis_offsets(dim: int, window: int, stride: int) -> list[int]:
    offsets = list(range(0, dim - window + 1, stride))
    if offsets[-1] != dim - window:
        offsets.append(dim - window)  # clamp the last window flush with the edge
    return offsets


def plan_windows(width: int, height: int, window: int, stride: int) -> WindowPlan:
    """Plan square windows of side ``window`` advancing by ``stride``.

    Windows start at multiples of the stride; a final clamped window is added
    per axis when the stride does not land flush, so the union always covers
    the full plane.  The window must fit inside the plane and the stride must
    lie in ``[1, window]``.
    """
    if window < 1:
        raise ValueError("window must be positive")
    if window > width or window > height:
        raise ValueError(f"window {window} does not fit inside {width}x{height}")
    if not 1 <= stride <= window:
        raise ValueError(f"stride must lie in [1, window], got {stride}")
    xs = _axis_offsets(width, window, stride)
    ys = _axis_offsets(height, window, stride)
    rects = tuple((x, y, window, window) for y in ys for x in xs)
    return WindowPlan(width=width, height=height, window=window, stride=stride, rects=rects)


def aggregate_windows(partials: Sequence[ProbabilityMap], plan: WindowPlan) -> ProbabilityMap:
    """Average per-window probability maps back into one full-plane map.

    Each pixel takes the mean of every window covering it, clamped to the
    range its contributions span (so constant inputs reproduce exactly).
    """
    if len(partials) != len(plan.rects):
        raise ValueError(f"expected {len(plan.rects)} window maps, got {len(partials)}")
    total = np.zeros((plan.height, plan.width))
    count = np.zeros((plan.height, plan.width), dtype=np.int64)
    lo = np.full((plan.height, plan.width), np.inf)
    hi = np.full((plan.height, plan.width), -np.inf)
    for pm, (x, y, w, h) in zip(partials, plan.rects):
        if pm.width != w or pm.height != h:
            raise ValueError(f"window map is {pm.width}x{pm.height}, rect wants {w}x{h}")
        sl = np.s_[y : y + h, x : x + w]
        total[sl] += pm.values
        count[sl] += 1
        np.minimum(lo[sl], pm.values, out=lo[sl])
        np.maximum(hi[sl], pm.values, out=hi[sl])
    # a window plan covers the plane, so every pixel has at least one vote
    values = np.clip(total / count, lo, hi)
    return ProbabilityMap(width=plan.width, height=plan.height, values=values)


def plan_tiles(width: int, height: int, cap: int) -> TilePlan:
    """Split a plane into non-overlapping tiles no larger than ``cap`` per side."""
    if cap < 1:
        raise ValueError("tile cap must be positive")
    rects = tuple(
        (x, y, min(cap, width - x), min(cap, height - y))
        for y in range(0, height, cap)
        for x in range(0, width, cap)
    )
    return TilePlan(width=width, height=height, cap=cap, rects=rects)


def merge_tiles(tiles: Sequence[BinaryMask], plan: TilePlan) -> BinaryMask:
    """Reassemble per-tile masks into the full plane."""
    if len(tiles) != len(plan.rects):
        raise ValueError(f"expected {len(plan.rects)} tiles, got {len(tiles)}")
    out = np.zeros((plan.height, plan.width), dtype=bool)
    for tile, (x, y, w, h) in zip(tiles, plan.rects):
        if tile.width != w or tile.height != h:
            raise ValueError(f"tile is {tile.width}x{tile.height}, rect wants {w}x{h}")
        out[y : y + h, x : x + w] = tile.array
    return BinaryMask.from_array(out)


def embed_mask(mask: BinaryMask, rect: Rect, width: int, height: int) -> BinaryMask:
    """Paste a mask covering ``rect`` into an otherwise-empty full-size frame."""
    x, y, w, h = rect
    if mask.width != w or mask.height != h:
        raise ValueError(f"mask is {mask.width}x{mask.height}, rect wants {w}x{h}")
    if x < 0 or y < 0 or x + w > width or y + h > height:
        raise ValueError(f"rect {rect} escapes the {width}x{height} frame")
    out = np.zeros((height, width), dtype=bool)
    out[y : y + h, x : x + w] = mask.array
    return BinaryMask.from_array(out)


def scaled_dims(width: int, height: int, long_side: int) -> tuple[int, int]:
    """Dimensions after scaling so the longer side equals ``long_side``.

    The short side rounds half-up and never collapses below one pixel.
    """
    if width < 1 or height < 1 or long_side < 1:
        raise ValueError("scaled_dims needs positive dimensions")
    longest = max(width, height)
    return (
        max(1, (width * long_side + longest // 2) // longest),
        max(1, (height * long_side + longest // 2) // longest),
    )


def resize_nearest(values: np.ndarray, out_width: int, out_height: int) -> np.ndarray:
    """Nearest-neighbour resample of the leading two (row, column) axes.

    Uses the centre-aligned integer rule, so resampling by an exact integer
    factor and back is the identity.
    """
    if out_width < 1 or out_height < 1:
        raise ValueError("target dimensions must be positive")
    arr = np.asarray(values)
    if arr.ndim < 2:
        raise ValueError("expected at least a 2-D array")
    src_h, src_w = arr.shape[:2]
    ys = np.array([((2 * i + 1) * src_h) // (2 * out_height) for i in range(out_height)])
    xs = np.array([((2 * j + 1) * src_w) // (2 * out_width) for j in range(out_width)])
    return arr[ys[:, None], xs[None, :]]
