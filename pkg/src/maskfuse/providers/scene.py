"""Deterministic synthetic scenes: ground truth, indicator maps, exact proposals.

A scene is a stack of coloured shapes over a background.  Later shapes occlude
earlier ones.  The derived artefacts are exactly consistent with each other:
the label map records the visible class per pixel, per-class probability maps
are (optionally noised) indicators of those labels, and the proposal set holds
one exact mask per visible shape plus a configurable number of distractor
rectangles whose plurality class is the background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..contrastive import ProposalSet
from ..raster import BinaryMask, LabelMap, ProbabilityMap

# fixed palette; class 0 (background) is dark grey
_PALETTE = np.array(
    [
        [40, 40, 40],
        [220, 60, 60],
        [60, 200, 80],
        [70, 90, 230],
        [230, 200, 50],
        [190, 70, 200],
        [60, 210, 210],
        [240, 140, 40],
        [150, 150, 150],
    ],
    dtype=np.uint8,
)


def class_color(index: int) -> tuple[int, int, int]:
    r, g, b = _PALETTE[index % len(_PALETTE)]
    return int(r), int(g), int(b)


@dataclass(frozen=True)
class ShapeSpec:
    """One shape: ``rect`` params are (x, y, w, h); ``disk`` params are (cx, cy, r)."""

    kind: str
    class_index: int
    params: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("rect", "disk"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.class_index < 1:
            raise ValueError("shapes must carry a non-background class index (>= 1)")
        need = 4 if self.kind == "rect" else 3
        if len(self.params) != need:
            raise ValueError(f"{self.kind} takes {need} params, got {len(self.params)}")


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    shapes: tuple[ShapeSpec, ...]
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("scene dimensions must be positive")
        for s in self.shapes:
            if s.kind == "rect":
                x, y, w, h = s.params
                if w < 1 or h < 1 or x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                    raise ValueError(f"rect {s.params} escapes the {self.width}x{self.height} frame")
            else:
                cx, cy, r = s.params
                if r < 1 or cx - r < 0 or cy - r < 0 or cx + r >= self.width or cy + r >= self.height:
                    raise ValueError(f"disk {s.params} escapes the {self.width}x{self.height} frame")

    @property
    def class_count(self) -> int:
        top = max((s.class_index for s in self.shapes), default=1)
        return top + 1


@dataclass(frozen=True, eq=False)
class Scene:
    spec: SceneSpec
    image: np.ndarray
    gt: LabelMap
    maps: tuple[ProbabilityMap, ...]
    proposals: ProposalSet


def _shape_plane(spec: SceneSpec, shape: ShapeSpec) -> np.ndarray:
    plane = np.zeros((spec.height, spec.width), dtype=bool)
    if shape.kind == "rect":
        x, y, w, h = shape.params
        plane[y : y + h, x : x + w] = True
    else:
        cx, cy, r = shape.params
        yy, xx = np.indices(plane.shape)
        plane[(xx - cx) ** 2 + (yy - cy) ** 2 <= r * r] = True
    return plane


def background_dominant_rects(
    gt_labels: np.ndarray, background_index: int, count: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Random rectangles whose plurality class under ``gt_labels`` is the background."""
    h, w = gt_labels.shape
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 200 * count + 200:
            raise ValueError("could not place background-dominant distractors; scene too dense")
        rw = int(rng.integers(2, max(3, w // 3) + 1))
        rh = int(rng.integers(2, max(3, h // 3) + 1))
        x = int(rng.integers(0, w - rw + 1))
        y = int(rng.integers(0, h - rh + 1))
        patch = gt_labels[y : y + rh, x : x + rw]
        counts = np.bincount(patch.reshape(-1), minlength=int(gt_labels.max()) + 1)
        if int(np.argmax(counts)) == background_index:
            plane = np.zeros((h, w), dtype=bool)
            plane[y : y + rh, x : x + rw] = True
            out.append(plane)
    return out


def make_scene(
    spec: SceneSpec,
    *,
    noise: float = 0.0,
    distractor_count: int = 0,
    grid_n: int = 29,
) -> Scene:
    """Render a scene and derive its exactly-consistent artefacts.

    ``noise`` perturbs each probability map with uniform jitter of that
    amplitude (clipped to [0, 1]); below 0.5 the per-pixel argmax decision is
    unaffected.  Distractor rectangles are appended to the proposal set and
    are always background-plurality, so a correct composition drops them.
    """
    if not 0.0 <= noise < 0.5:
        raise ValueError("noise must lie in [0, 0.5)")
    if distractor_count < 0:
        raise ValueError("distractor_count must be non-negative")
    rng = np.random.default_rng(spec.seed)

    owner = np.full((spec.height, spec.width), -1, dtype=np.int64)
    labels = np.zeros((spec.height, spec.width), dtype=np.int64)
    for k, shape in enumerate(spec.shapes):
        plane = _shape_plane(spec, shape)
        owner[plane] = k
        labels[plane] = shape.class_index
    gt = LabelMap(
        width=spec.width,
        height=spec.height,
        labels=labels,
        background_index=0,
        class_count=spec.class_count,
    )

    image = _PALETTE[labels % len(_PALETTE)].astype(np.float64)
    image += rng.normal(0.0, 6.0, size=image.shape)
    image = np.clip(np.rint(image), 0, 255).astype(np.uint8)

    maps = []
    for i in range(spec.class_count):
        values = (labels == i).astype(np.float64)
        if noise:
            values = np.clip(values + rng.uniform(-noise, noise, size=values.shape), 0.0, 1.0)
        maps.append(ProbabilityMap(width=spec.width, height=spec.height, values=values))

    proposals = [
        BinaryMask.from_array(owner == k)
        for k in range(len(spec.shapes))
        if bool((owner == k).any())  # fully occluded shapes contribute nothing
    ]
    for plane in background_dominant_rects(labels, 0, distractor_count, rng):
        proposals.append(BinaryMask.from_array(plane))

    return Scene(
        spec=spec,
        image=image,
        gt=gt,
        maps=tuple(maps),
        proposals=ProposalSet(proposals=tuple(proposals), source_grid=grid_n),
    )


def random_scene_spec(
    seed: int,
    *,
    width: int = 64,
    height: int = 64,
    min_classes: int = 3,
    max_classes: int = 5,
) -> SceneSpec:
    """A seeded non-overlapping scene with one shape per non-background class.

    Shapes never touch, and each is large enough that a reasonably dense
    prompt grid cannot miss it, which keeps every derived artefact exactly
    reconstructable from the others.
    """
    rng = np.random.default_rng(seed)
    class_count = int(rng.integers(min_classes, max_classes + 1))
    occupied = np.zeros((height, width), dtype=bool)
    shapes: list[ShapeSpec] = []
    for class_index in range(1, class_count):
        for _ in range(500):
            if rng.random() < 0.5:
                w = int(rng.integers(6, max(7, width // 4) + 1))
                h = int(rng.integers(6, max(7, height // 4) + 1))
                x = int(rng.integers(0, width - w + 1))
                y = int(rng.integers(0, height - h + 1))
                plane = np.zeros((height, width), dtype=bool)
                plane[y : y + h, x : x + w] = True
                candidate = ShapeSpec(kind="rect", class_index=class_index, params=(x, y, w, h))
            else:
                r = int(rng.integers(4, max(5, min(width, height) // 8) + 1))
                cx = int(rng.integers(r, width - r))
                cy = int(rng.integers(r, height - r))
                yy, xx = np.indices((height, width))
                plane = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
                candidate = ShapeSpec(kind="disk", class_index=class_index, params=(cx, cy, r))
            # demand a one-pixel moat so shapes stay separate components
            grown = np.zeros_like(plane)
            ys, xs = np.nonzero(plane)
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    grown[
                        np.clip(ys + dy, 0, height - 1), np.clip(xs + dx, 0, width - 1)
                    ] = True
            if not (grown & occupied).any():
                occupied |= grown
                shapes.append(candidate)
                break
        else:
            raise ValueError(f"could not place shape for class {class_index} (seed {seed})")
    return SceneSpec(width=width, height=height, shapes=tuple(shapes), seed=seed)
