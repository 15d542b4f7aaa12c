"""File formats: mask/label PNGs, the PMAP probability container, class prompt files."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .contrastive import ClassPrompts
from .raster import BinaryMask, LabelMap, ProbabilityMap

PMAP_MAGIC = b"PMAP"
_PMAP_HEADER = struct.Struct("<4sIII")  # magic, width, height, reserved


def save_mask_png(mask: BinaryMask, path) -> None:
    """Write a mask as an 8-bit single-channel PNG: 0 background, 255 foreground."""
    img = Image.fromarray(np.where(mask.array, 255, 0).astype(np.uint8), mode="L")
    img.save(path, format="PNG")


def load_mask_png(path) -> BinaryMask:
    """Read a mask PNG; any nonzero value loads as foreground."""
    try:
        with Image.open(path) as img:
            plane = np.asarray(img.convert("L"))
    except Exception as exc:
        raise ValueError(f"{path}: not a readable mask PNG ({exc})") from exc
    return BinaryMask.from_array(plane != 0)


def save_labelmap_png(labelmap: LabelMap, path) -> None:
    """Write class indices as an 8-bit single-channel PNG (up to 256 classes)."""
    if labelmap.class_count > 256:
        raise ValueError("label PNG supports at most 256 classes")
    img = Image.fromarray(labelmap.labels.astype(np.uint8), mode="L")
    img.save(path, format="PNG")


def load_labelmap_png(path, class_count: int, background_index: int = 0) -> LabelMap:
    """Read a class-index PNG; pixel values must lie below ``class_count``."""
    try:
        with Image.open(path) as img:
            plane = np.asarray(img.convert("L"))
    except Exception as exc:
        raise ValueError(f"{path}: not a readable label PNG ({exc})") from exc
    try:
        return LabelMap.from_array(plane, background_index=background_index, class_count=class_count)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def load_image_rgb(path) -> np.ndarray:
    """Read an image as an ``(h, w, 3)`` uint8 array."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except Exception as exc:
        raise ValueError(f"{path}: not a readable image ({exc})") from exc


def save_image_rgb(pixels: np.ndarray, path) -> None:
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (h, w, 3) array, got shape {arr.shape}")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def write_pmap(prob: ProbabilityMap, path) -> None:
    """Write a probability map in the PMAP container.

    Layout: 16-byte little-endian header (magic ``PMAP``, u32 width, u32
    height, u32 reserved = 0) followed by row-major float32 values.
    """
    header = _PMAP_HEADER.pack(PMAP_MAGIC, prob.width, prob.height, 0)
    body = prob.values.astype("<f4").tobytes(order="C")
    Path(path).write_bytes(header + body)


def read_pmap(path) -> ProbabilityMap:
    """Read a PMAP container; malformed headers or out-of-range values raise."""
    raw = Path(path).read_bytes()
    if len(raw) < _PMAP_HEADER.size:
        raise ValueError(f"{path}: truncated PMAP header")
    magic, width, height, _reserved = _PMAP_HEADER.unpack_from(raw)
    if magic != PMAP_MAGIC:
        raise ValueError(f"{path}: bad PMAP magic {magic!r}")
    expected = _PMAP_HEADER.size + 4 * width * height
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {width}x{height}, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", offset=_PMAP_HEADER.size).reshape(height, width)
    try:
        return ProbabilityMap(width=width, height=height, values=values.astype(np.float64))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def save_class_prompts(prompts: ClassPrompts, path) -> None:
    """Write one class name per line, with a background marker when nonzero."""
    lines = []
    if prompts.background_index != 0:
        lines.append(f"#background={prompts.background_index}")
    lines.extend(prompts.names)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_class_prompts(path) -> ClassPrompts:
    """Read a class prompt file: one name per line, index = line order.

    An optional first line ``#background=<index>`` overrides the default
    background index of 0.  Blank lines are ignored; duplicate names raise.
    """
    text = Path(path).read_text(encoding="utf-8")
    background = 0
    names: list[str] = []
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#background="):
            if names:
                raise ValueError(f"{path}: background marker must precede class names")
            try:
                background = int(line.split("=", 1)[1])
            except ValueError as exc:
                raise ValueError(f"{path}: line {i + 1}: bad background index") from exc
            continue
        if line.startswith("#"):
            continue  # comment
        names.append(line)
    try:
        return ClassPrompts(names=tuple(names), background_index=background)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
