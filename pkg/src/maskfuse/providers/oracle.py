"""Ground-truth-backed providers: ideal (or controllably imperfect) model stand-ins.

These implement the same call surfaces as the HTTP providers but answer from a
known label map, which makes end-to-end orchestration exactly checkable: the
probability-map provider returns class indicators, the proposal provider
returns per-class connected components that a prompt grid would hit, the
segmenter returns clicked components, and the click suggester replies with the
most interior pixel of each foreground component in a configurable wire format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..clicks import ClickSet, serialize_clicks_text
from ..contrastive import ClassPrompts
from ..raster import (
    BinaryMask,
    LabelMap,
    ProbabilityMap,
    distance_transform,
    mask_union,
)
from ..tiling import Rect, grid_clicks, resize_nearest, scaled_dims


def connected_components(mask: BinaryMask) -> list[BinaryMask]:
    """4-connected components in raster order (may be empty)."""
    labelled, n = ndimage.label(mask.array)
    return [BinaryMask.from_array(labelled == i) for i in range(1, n + 1)]


def oracle_segment(gt: BinaryMask, clicks: ClickSet, *, behavior: str = "ideal") -> BinaryMask:
    """Segment by component membership of the clicks.

    The result is the union of the 4-connected components of ``gt`` that
    contain at least one positive click and no negative click.  With
    ``behavior="erode1"``, a kept component is returned one pixel eroded
    unless some positive click sits on its boundary (a pixel with a
    4-neighbour outside the component, the frame included) — a stand-in for
    a segmenter that undershoots object borders until prompted near them.
    """
    if behavior not in ("ideal", "erode1"):
        raise ValueError(f"unknown oracle behavior {behavior!r}")
    for x, y in clicks.positives + clicks.negatives:
        if not (0 <= x < gt.width and 0 <= y < gt.height):
            raise ValueError(f"click ({x}, {y}) outside the {gt.width}x{gt.height} frame")
    kept: list[BinaryMask] = []
    for comp in connected_components(gt):
        if not any(comp.contains(x, y) for x, y in clicks.positives):
            continue
        if any(comp.contains(x, y) for x, y in clicks.negatives):
            continue
        if behavior == "erode1":
            eroded = ndimage.binary_erosion(comp.array, border_value=0)
            boundary = comp.array & ~eroded
            if not any(boundary[y, x] for x, y in clicks.positives):
                comp = BinaryMask.from_array(eroded)
        kept.append(comp)
    if not kept:
        return BinaryMask.zeros(gt.width, gt.height)
    return mask_union(kept)


def most_interior_pixel(mask: BinaryMask) -> tuple[int, int]:
    """The pixel furthest from the outside; row-major on ties."""
    if mask.count == 0:
        raise ValueError("mask is empty")
    field = distance_transform(mask)
    idx = int(np.argmax(field.values.reshape(-1)))
    y, x = divmod(idx, mask.width)
    return x, y


@dataclass
class GroundTruthOracle:
    """All four provider capabilities answered from one ground-truth label map.

    ``noise`` jitters probability maps (uniform, clipped; argmax-preserving
    below 0.5).  ``distractors`` appends that many background-plurality
    rectangles to every proposal reply.  ``behavior`` configures the
    segmenter; ``click_format`` picks the suggester's wire format: ``text``,
    ``json``, or ``json-think`` (JSON preceded by a reasoning preamble).
    """

    gt: LabelMap
    seed: int = 0
    noise: float = 0.0
    distractors: int = 0
    behavior: str = "ideal"
    click_format: str = "text"

    def __post_init__(self):
        if not 0.0 <= self.noise < 0.5:
            raise ValueError("noise must lie in [0, 0.5)")
        if self.distractors < 0:
            raise ValueError("distractors must be non-negative")
        if self.click_format not in ("text", "json", "json-think"):
            raise ValueError(f"unknown click format {self.click_format!r}")

    @classmethod
    def from_mask(cls, mask: BinaryMask, **kwargs) -> "GroundTruthOracle":
        return cls(gt=LabelMap.from_mask(mask), **kwargs)

    # -- shared helpers ----------------------------------------------------

    def _rect(self, region: Rect | None) -> Rect:
        if region is None:
            return (0, 0, self.gt.width, self.gt.height)
        x, y, w, h = region
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > self.gt.width or y + h > self.gt.height:
            raise ValueError(f"region {region} escapes the {self.gt.width}x{self.gt.height} frame")
        return region

    def _crop_labels(self, region: Rect) -> np.ndarray:
        x, y, w, h = region
        return self.gt.labels[y : y + h, x : x + w]

    @property
    def foreground(self) -> BinaryMask:
        return BinaryMask.from_array(self.gt.labels != self.gt.background_index)

    # -- capability: probability maps --------------------------------------

    def probability_maps(
        self, image, classes: ClassPrompts, long_side: int, region: Rect | None = None
    ) -> list[ProbabilityMap]:
        """Per-class indicators of the (cropped) ground truth, resampled to ``long_side``."""
        if long_side < 1:
            raise ValueError("long_side must be positive")
        x, y, w, h = self._rect(region)
        crop = self._crop_labels((x, y, w, h))
        tw, th = scaled_dims(w, h, long_side)
        rng = np.random.default_rng((self.seed, 1, x, y, w, h))
        out = []
        for i in range(classes.class_count):
            values = resize_nearest((crop == i).astype(np.float64), tw, th)
            if self.noise:
                values = np.clip(values + rng.uniform(-self.noise, self.noise, values.shape), 0.0, 1.0)
            out.append(ProbabilityMap(width=tw, height=th, values=values))
        return out

    # -- capability: mask proposals ----------------------------------------

    def mask_proposals(self, image, grid_n: int, region: Rect | None = None) -> list[BinaryMask]:
        """Per-class components of the (cropped) ground truth that a click grid hits.

        Components too small to contain any grid click go unreported, the way
        a grid-prompted segmenter would miss them.  Distractor rectangles,
        when configured, are appended after the real components.
        """
        x, y, w, h = self._rect(region)
        crop = self._crop_labels((x, y, w, h))
        pts = grid_clicks(w, h, grid_n)
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        out: list[BinaryMask] = []
        for i in range(self.gt.class_count):
            if i == self.gt.background_index:
                continue
            for comp in connected_components(BinaryMask.from_array(crop == i)):
                if bool(comp.array[ys, xs].any()):
                    out.append(comp)
        if self.distractors:
            from .scene import background_dominant_rects

            rng = np.random.default_rng((self.seed, 2, x, y, w, h))
            for plane in background_dominant_rects(
                crop, self.gt.background_index, self.distractors, rng
            ):
                out.append(BinaryMask.from_array(plane))
        return out

    # -- capability: promptable segmentation -------------------------------

    def segment(self, image, clicks: ClickSet, region: Rect | None = None) -> BinaryMask:
        x, y, w, h = self._rect(region)
        crop = BinaryMask.from_array(self._crop_labels((x, y, w, h)) != self.gt.background_index)
        return oracle_segment(crop, clicks, behavior=self.behavior)

    # -- capability: click suggestions -------------------------------------

    def suggest(self, image, question: str, max_clicks: int) -> str:
        """One positive click at the most interior pixel of each foreground component.

        Components are taken in descending area order up to ``max_clicks``.
        """
        if max_clicks < 1:
            raise ValueError("max_clicks must be positive")
        comps = connected_components(self.foreground)
        comps.sort(key=lambda c: -c.count)
        points = [most_interior_pixel(c) for c in comps[:max_clicks]]
        if self.click_format == "text":
            return serialize_clicks_text(ClickSet(positives=tuple(points)))
        body = json.dumps([{"x": x, "y": y} for x, y in points])
        if self.click_format == "json":
            return body
        return f"<think>locating each target region and picking its interior</think>\n{body}"
