"""Overlay rendering for inspection: masks, label maps, and click traces."""

from __future__ import annotations

import numpy as np

from .clicks import POSITIVE, ClickSet, ClickTrace
from .providers.scene import class_color
from .raster import BinaryMask, LabelMap

POSITIVE_COLOR = (0, 200, 0)
NEGATIVE_COLOR = (230, 40, 40)
MASK_COLOR = (70, 130, 255)


def _as_rgb_float(image: np.ndarray) -> np.ndarray:
    pixels = np.asarray(image)
    if pixels.ndim == 2:
        pixels = np.stack([pixels] * 3, axis=-1)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"expected an RGB or greyscale image, got shape {pixels.shape}")
    return pixels.astype(np.float64)


def _blend(pixels: np.ndarray, where: np.ndarray, color, alpha: float) -> None:
    pixels[where] = (1.0 - alpha) * pixels[where] + alpha * np.asarray(color, dtype=np.float64)


def _finish(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(pixels), 0, 255).astype(np.uint8)


def _draw_dot(pixels: np.ndarray, x: int, y: int, radius: int, color) -> None:
    height, width = pixels.shape[:2]
    yy, xx = np.ogrid[:height, :width]
    pixels[(xx - x) ** 2 + (yy - y) ** 2 <= radius**2] = color


def render_overlay(
    image: np.ndarray,
    mask: BinaryMask | None = None,
    clicks: ClickSet | None = None,
    *,
    alpha: float = 0.45,
    radius: int = 2,
    mask_color=MASK_COLOR,
) -> np.ndarray:
    """Tint masked pixels and draw solid click dots (green positive, red negative)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    pixels = _as_rgb_float(image)
    if mask is not None:
        if (mask.height, mask.width) != pixels.shape[:2]:
            raise ValueError("mask dimensions do not match the image")
        _blend(pixels, mask.array, mask_color, alpha)
    if clicks is not None:
        for x, y in clicks.positives:
            _draw_dot(pixels, x, y, radius, POSITIVE_COLOR)
        for x, y in clicks.negatives:
            _draw_dot(pixels, x, y, radius, NEGATIVE_COLOR)
    return _finish(pixels)


def render_label_overlay(image: np.ndarray, labels: LabelMap, *, alpha: float = 0.45) -> np.ndarray:
    """Tint every non-background class with its palette colour."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    pixels = _as_rgb_float(image)
    if (labels.height, labels.width) != pixels.shape[:2]:
        raise ValueError("label map dimensions do not match the image")
    for class_index in range(labels.class_count):
        if class_index == labels.background_index:
            continue
        where = labels.labels == class_index
        if where.any():
            _blend(pixels, where, class_color(class_index), alpha)
    return _finish(pixels)


def trace_frames(
    image: np.ndarray,
    trace: ClickTrace,
    *,
    gt: BinaryMask | None = None,
    alpha: float = 0.35,
    radius: int = 2,
) -> list[np.ndarray]:
    """One frame per step, accumulating the clicks placed so far."""
    frames = []
    for upto in range(len(trace.steps)):
        placed = [step.click for step in trace.steps[: upto + 1]]
        positives = tuple((c.x, c.y) for c in placed if c.polarity == POSITIVE)
        negatives = tuple((c.x, c.y) for c in placed if c.polarity != POSITIVE)
        frames.append(
            render_overlay(
                image,
                mask=gt,
                clicks=ClickSet(positives=positives, negatives=negatives),
                alpha=alpha,
                radius=radius,
            )
        )
    return frames
