"""Click prompts: wire formats, error-driven sampling, and supervision generation.

The textual wire form is ``Positive: [(x1, y1), ...], Negative: [(x2, y2), ...]``.
Supervision traces are produced by iteratively segmenting with the clicks so
far, diffing the prediction against the ground truth, and placing the next
click inside the largest error region, where "largest" is measured by the
distance transform of the union of both error regions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .raster import (
    BinaryMask,
    _require_same_dims,
    distance_transform,
    iou,
    mask_difference,
    mask_union,
)

POSITIVE = "positive"
NEGATIVE = "negative"


class ClickParseError(ValueError):
    """A malformed click payload; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SegmenterStepError(RuntimeError):
    """A segmenter call failed mid-sequence; ``step`` is the 1-based click index."""

    def __init__(self, step: int, cause: str):
        super().__init__(f"segmenter failed at click {step}: {cause}")
        self.step = step


@dataclass(frozen=True)
class Click:
    x: int
    y: int
    polarity: str

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"click coordinates must be non-negative, got ({self.x}, {self.y})")
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ValueError(f"polarity must be '{POSITIVE}' or '{NEGATIVE}', got {self.polarity!r}")


@dataclass(frozen=True)
class ClickSet:
    """Positive and negative click coordinates, order preserved within each list."""

    positives: tuple[tuple[int, int], ...] = ()
    negatives: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        for name in ("positives", "negatives"):
            pts = tuple((int(x), int(y)) for x, y in getattr(self, name))
            if any(x < 0 or y < 0 for x, y in pts):
                raise ValueError(f"{name} must have non-negative coordinates")
            object.__setattr__(self, name, pts)

    @classmethod
    def from_clicks(cls, clicks: Iterable[Click]) -> "ClickSet":
        pos, neg = [], []
        for c in clicks:
            (pos if c.polarity == POSITIVE else neg).append((c.x, c.y))
        return cls(positives=tuple(pos), negatives=tuple(neg))

    @property
    def total(self) -> int:
        return len(self.positives) + len(self.negatives)


@dataclass(frozen=True)
class TraceStep:
    click: Click
    iou_after: float


@dataclass(frozen=True)
class ClickTrace:
    steps: tuple[TraceStep, ...]
    final_iou: float
    terminated_by: str  # "threshold" or "budget"


# ---------------------------------------------------------------------------
# textual wire form
# ---------------------------------------------------------------------------

def serialize_clicks_text(clicks: ClickSet) -> str:
    """Canonical text form, e.g. ``Positive: [(3, 4)], Negative: []``."""
    pos = ", ".join(f"({x}, {y})" for x, y in clicks.positives)
    neg = ", ".join(f"({x}, {y})" for x, y in clicks.negatives)
    return f"Positive: [{pos}], Negative: [{neg}]"


class _Scanner:
    """Tiny recursive-descent reader that reports faults by byte offset."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def byte_offset(self, pos: int | None = None) -> int:
        pos = self.pos if pos is None else pos
        return len(self.text[:pos].encode("utf-8"))

    def fail(self, message: str, pos: int | None = None):
        raise ClickParseError(message, self.byte_offset(pos))

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def expect(self, ch: str):
        if not self.take(ch):
            self.fail(f"expected {ch!r}")

    def keyword(self, word: str):
        # keys may be wrapped in single or double quotes
        quote = self.peek() if self.peek() in "'\"" else ""
        if quote:
            self.pos += 1
        if not self.text.startswith(word, self.pos):
            self.fail(f"expected {word!r}")
        self.pos += len(word)
        if quote and not self.take(quote):
            self.fail(f"unterminated quote around {word!r}")

    def integer(self) -> int:
        start = self.pos
        while self.peek().isdigit():
            self.pos += 1
        if self.pos == start:
            self.fail("expected an integer")
        return int(self.text[start : self.pos])

    def pair(self) -> tuple[int, int, int]:
        start = self.pos
        self.expect("(")
        self.skip_ws()
        x = self.integer()
        self.skip_ws()
        self.expect(",")
        self.skip_ws()
        y = self.integer()
        self.skip_ws()
        self.expect(")")
        return x, y, start

    def pair_list(self) -> list[tuple[int, int, int]]:
        self.expect("[")
        self.skip_ws()
        pairs: list[tuple[int, int, int]] = []
        if self.take("]"):
            return pairs
        while True:
            pairs.append(self.pair())
            self.skip_ws()
            if self.take("]"):
                return pairs
            self.expect(",")
            self.skip_ws()


def parse_clicks_text(text: str, *, max_clicks: int | None = None) -> ClickSet:
    """Parse the textual wire form; tolerant of whitespace, quoting and braces.

    The ``Negative`` list may be absent.  With ``max_clicks`` set, a payload
    whose combined click count exceeds the budget is rejected, pointing at the
    first excess coordinate.
    """
    s = _Scanner(text)
    s.skip_ws()
    braced = s.take("{")
    s.skip_ws()
    s.keyword("Positive")
    s.skip_ws()
    s.expect(":")
    s.skip_ws()
    positives = s.pair_list()
    negatives: list[tuple[int, int, int]] = []
    s.skip_ws()
    if s.take(","):
        s.skip_ws()
        s.keyword("Negative")
        s.skip_ws()
        s.expect(":")
        s.skip_ws()
        negatives = s.pair_list()
        s.skip_ws()
    if braced:
        s.expect("}")
        s.skip_ws()
    if s.pos != len(s.text):
        s.fail("unexpected trailing content")
    if max_clicks is not None:
        combined = positives + negatives
        if len(combined) > max_clicks:
            _, _, start = combined[max_clicks]
            s.fail(f"click budget of {max_clicks} exceeded", pos=start)
    return ClickSet(
        positives=tuple((x, y) for x, y, _ in positives),
        negatives=tuple((x, y) for x, y, _ in negatives),
    )


def parse_clicks_json(text: str) -> ClickSet:
    """Extract positive clicks from the first JSON array literal in ``text``.

    Entries must be objects carrying integer ``x`` and ``y``.  Any preamble
    before the array (reasoning text and the like) is ignored.
    """
    decoder = json.JSONDecoder()
    idx = text.find("[")
    value = None
    while idx != -1:
        try:
            value, _ = decoder.raw_decode(text, idx)
            break
        except json.JSONDecodeError:
            idx = text.find("[", idx + 1)
    if value is None:
        raise ClickParseError("no JSON array found", len(text.encode("utf-8")))
    points = []
    for i, entry in enumerate(value):
        if not isinstance(entry, dict) or "x" not in entry or "y" not in entry:
            raise ClickParseError(f"array entry {i} is not an object with x and y", idx)
        coords = []
        for key in ("x", "y"):
            v = entry[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or float(v) != int(v):
                raise ClickParseError(f"array entry {i} has a non-integer {key}", idx)
            coords.append(int(v))
        points.append((coords[0], coords[1]))
    return ClickSet(positives=tuple(points))


def parse_clicks_any(text: str, *, max_clicks: int | None = None) -> ClickSet:
    """Parse a click reply in either wire form.

    Tries the textual ``Positive: ... Negative: ...`` form first and falls back
    to the JSON array form.  The click budget, when given, applies to both.
    """
    try:
        clicks = parse_clicks_text(text)
    except ClickParseError as text_error:
        try:
            clicks = parse_clicks_json(text)
        except ClickParseError:
            raise text_error
    if max_clicks is not None and clicks.total > max_clicks:
        raise ClickParseError(f"more than {max_clicks} clicks in reply", 0)
    return clicks


def clickset_to_json(clicks: ClickSet) -> dict:
    return {
        "positive": [[x, y] for x, y in clicks.positives],
        "negative": [[x, y] for x, y in clicks.negatives],
    }


def clickset_from_json(obj: dict) -> ClickSet:
    try:
        return ClickSet(
            positives=tuple((int(x), int(y)) for x, y in obj.get("positive", [])),
            negatives=tuple((int(x), int(y)) for x, y in obj.get("negative", [])),
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"malformed click record: {exc}") from exc


# ---------------------------------------------------------------------------
# click placement and the supervision loop
# ---------------------------------------------------------------------------

def sample_click(
    e_plus: BinaryMask,
    e_minus: BinaryMask,
    rng: np.random.Generator,
    *,
    mode: str = "sample",
) -> Click:
    """Place one click inside the union of the two (disjoint) error regions.

    The click lands far from region boundaries: candidate pixels are weighted
    by their distance to the nearest non-error pixel.  ``mode="sample"`` draws
    proportionally to that distance; ``mode="argmax"`` takes the most interior
    pixel, breaking ties in row-major order.  Polarity is positive when the
    pixel lies in ``e_plus`` (missing foreground), negative otherwise.
    """
    _require_same_dims(e_plus, e_minus, "sample_click")
    region = mask_union([e_plus, e_minus])
    if region.count == 0:
        raise ValueError("cannot place a click: both error regions are empty")
    flat = distance_transform(region).values.reshape(-1)
    if mode == "argmax":
        idx = int(np.argmax(flat))
    elif mode == "sample":
        idx = int(rng.choice(flat.size, p=flat / flat.sum()))
    else:
        raise ValueError(f"unknown sampling mode: {mode!r}")
    y, x = divmod(idx, region.width)
    polarity = POSITIVE if e_plus.contains(x, y) else NEGATIVE
    return Click(x=x, y=y, polarity=polarity)


def generate_click_sequence(
    image,
    gt: BinaryMask,
    segmenter,
    *,
    max_iters: int = 6,
    tau: float = 0.98,
    rng: np.random.Generator | None = None,
    mode: str = "sample",
) -> tuple[ClickSet, ClickTrace]:
    """Grow a click set until the segmenter reproduces ``gt`` well enough.

    Starting from an empty prediction, each round diffs the current prediction
    against the ground truth, samples one click in the error regions, and
    re-segments with all clicks so far.  The loop stops once the prediction's
    overlap reaches ``tau`` or after ``max_iters`` clicks.  ``image`` is passed
    through to the segmenter untouched.

    Returns the final click set and a trace holding one (click, overlap)
    entry per round plus how the loop terminated.
    """
    if gt.count == 0:
        raise ValueError("ground truth mask is empty")
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    rng = np.random.default_rng() if rng is None else rng

    clicks: list[Click] = []
    steps: list[TraceStep] = []
    pred = BinaryMask.zeros(gt.width, gt.height)
    current = iou(pred, gt)
    for step in range(1, max_iters + 1):
        if current >= tau:
            break
        e_plus = mask_difference(gt, pred)
        e_minus = mask_difference(pred, gt)
        click = sample_click(e_plus, e_minus, rng, mode=mode)
        clicks.append(click)
        try:
            pred = segmenter.segment(image, ClickSet.from_clicks(clicks))
        except Exception as exc:
            raise SegmenterStepError(step=step, cause=str(exc)) from exc
        _require_same_dims(pred, gt, "generate_click_sequence")
        current = iou(pred, gt)
        steps.append(TraceStep(click=click, iou_after=current))
    terminated = "threshold" if current >= tau else "budget"
    return ClickSet.from_clicks(clicks), ClickTrace(
        steps=tuple(steps), final_iou=current, terminated_by=terminated
    )


def ensemble_vote(masks: Sequence[BinaryMask], *, ties_foreground: bool = True) -> BinaryMask:
    """Per-pixel majority vote across masks; ties go to foreground by default."""
    if not masks:
        raise ValueError("ensemble_vote requires at least one mask")
    for m in masks[1:]:
        _require_same_dims(masks[0], m, "ensemble_vote")
    counts = np.zeros((masks[0].height, masks[0].width), dtype=np.int64)
    for m in masks:
        counts += m.array
    n = len(masks)
    fg = (2 * counts >= n) if ties_foreground else (2 * counts > n)
    return BinaryMask.from_array(fg)


# ---------------------------------------------------------------------------
# trace serialisation (sidecar for visualisation and audits)
# ---------------------------------------------------------------------------

def trace_to_json(trace: ClickTrace, *, image: str = "", prompt: str = "") -> dict:
    return {
        "image": image,
        "prompt": prompt,
        "steps": [
            {"x": s.click.x, "y": s.click.y, "polarity": s.click.polarity, "iou_after": s.iou_after}
            for s in trace.steps
        ],
        "final_iou": trace.final_iou,
        "terminated_by": trace.terminated_by,
    }


def trace_from_json(obj: dict) -> ClickTrace:
    steps = tuple(
        TraceStep(
            click=Click(x=int(s["x"]), y=int(s["y"]), polarity=str(s["polarity"])),
            iou_after=float(s["iou_after"]),
        )
        for s in obj.get("steps", [])
    )
    return ClickTrace(
        steps=steps,
        final_iou=float(obj.get("final_iou", 0.0)),
        terminated_by=str(obj.get("terminated_by", "budget")),
    )
