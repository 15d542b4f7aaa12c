"""Probability-guided selection of class-agnostic mask proposals.

The central operator scores each proposal by the fraction of its pixels whose
foreground probability strictly exceeds one half, admits the proposal when
that fraction itself strictly exceeds one half, and returns the union of the
admitted proposals.  Multi-class composition assigns each proposal the
plurality class of a per-pixel argmax map and paints proposals in descending
area order so that small structures override large background-ish segments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .raster import (
    BinaryMask,
    LabelMap,
    ProbabilityMap,
    _require_same_dims,
    fraction_above,
    mask_union,
)


@dataclass(frozen=True)
class ClassPrompts:
    """Ordered class names; index in the tuple is the class index."""

    names: tuple[str, ...]
    background_index: int = 0

    def __post_init__(self):
        names = tuple(self.names)
        if not names:
            raise ValueError("at least one class name is required")
        if any(not n for n in names):
            raise ValueError("class names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        if not 0 <= self.background_index < len(names):
            raise ValueError(f"background_index {self.background_index} outside [0, {len(names)})")
        object.__setattr__(self, "names", names)

    @property
    def class_count(self) -> int:
        return len(self.names)


@dataclass(frozen=True, eq=False)
class ProposalSet:
    """Class-agnostic mask proposals over a single image.

    ``source_grid`` records the prompt-grid density that elicited the
    proposals (0 when unknown).
    """

    proposals: tuple[BinaryMask, ...] = field(default_factory=tuple)
    source_grid: int = 0

    def __post_init__(self):
        proposals = tuple(self.proposals)
        if self.source_grid < 0:
            raise ValueError("source_grid must be >= 0")
        for p in proposals[1:]:
            _require_same_dims(proposals[0], p, "ProposalSet")
        object.__setattr__(self, "proposals", proposals)

    def __len__(self) -> int:
        return len(self.proposals)

    def __iter__(self):
        return iter(self.proposals)


@dataclass(frozen=True, eq=False)
class TokenMatrix:
    """A stack of feature tokens plus the global summary token used to debias them."""

    values: np.ndarray
    cls: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        cls = np.ascontiguousarray(self.cls, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"token matrix must be 2-D, got shape {values.shape}")
        if cls.shape != (values.shape[1],):
            raise ValueError(
                f"summary token length {cls.shape} does not match token width {values.shape[1]}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cls", cls)


def select_masks(
    proposals: ProposalSet,
    prob: ProbabilityMap,
    *,
    pixel_threshold: float = 0.5,
    area_threshold: float = 0.5,
) -> BinaryMask:
    """Union of the proposals that a probability map votes for.

    A proposal is admitted when the fraction of its pixels with probability
    strictly above ``pixel_threshold`` strictly exceeds ``area_threshold``.
    Empty proposals are never admitted.  Returns the all-background mask when
    nothing is admitted.
    """
    if len(proposals):
        _require_same_dims(proposals.proposals[0], prob, "select_masks")
    chosen = [
        p
        for p in proposals
        if p.count > 0 and fraction_above(p, prob, pixel_threshold) > area_threshold
    ]
    if not chosen:
        return BinaryMask.zeros(prob.width, prob.height)
    return mask_union(chosen)


def pixel_argmax(maps: Sequence[ProbabilityMap], prompts: ClassPrompts) -> LabelMap:
    """Per-pixel class decision: argmax over one probability map per class.

    Ties resolve to the lowest class index.
    """
    if len(maps) != prompts.class_count:
        raise ValueError(f"expected {prompts.class_count} maps, got {len(maps)}")
    for m in maps[1:]:
        _require_same_dims(maps[0], m, "pixel_argmax")
    stack = np.stack([m.values for m in maps])
    labels = np.argmax(stack, axis=0)  # first maximum wins: lowest class index
    return LabelMap(
        width=maps[0].width,
        height=maps[0].height,
        labels=labels,
        background_index=prompts.background_index,
        class_count=prompts.class_count,
    )


def dominant_class(proposal: BinaryMask, labels: LabelMap) -> int:
    """Plurality class among the proposal's pixels; ties go to the lowest index."""
    _require_same_dims(proposal, labels, "dominant_class")
    if proposal.count == 0:
        raise ValueError("dominant_class is undefined for an empty proposal")
    counts = np.bincount(labels.labels[proposal.array], minlength=labels.class_count)
    return int(np.argmax(counts))


def compose_multiclass(
    proposals: ProposalSet,
    labels: LabelMap,
    *,
    uncovered: str = "background",
) -> LabelMap:
    """Paint proposals with their dominant classes into a single label map.

    Proposals are painted in descending area order so that smaller (later)
    proposals overwrite larger ones where they overlap.  Proposals whose
    dominant class is the background are skipped, as are empty proposals.
    Pixels no surviving proposal covers stay background, or take the
    per-pixel argmax decision when ``uncovered="pixel-argmax"``.
    """
    if uncovered not in ("background", "pixel-argmax"):
        raise ValueError(f"unknown uncovered policy: {uncovered!r}")
    if len(proposals):
        _require_same_dims(proposals.proposals[0], labels, "compose_multiclass")
    if uncovered == "pixel-argmax":
        out = labels.labels.copy()
    else:
        out = np.full((labels.height, labels.width), labels.background_index, dtype=np.int64)
    order = sorted(range(len(proposals)), key=lambda k: -proposals.proposals[k].count)
    for k in order:
        p = proposals.proposals[k]
        if p.count == 0:
            continue
        cls = dominant_class(p, labels)
        if cls == labels.background_index:
            continue
        out[p.array] = cls
    return LabelMap(
        width=labels.width,
        height=labels.height,
        labels=out,
        background_index=labels.background_index,
        class_count=labels.class_count,
    )


def debias_tokens(tokens: TokenMatrix, scale: float) -> TokenMatrix:
    """Subtract the scaled global summary token from every token row."""
    return TokenMatrix(values=tokens.values - scale * tokens.cls, cls=tokens.cls)
