"""Base64 payload helpers shared by the HTTP client and the reference server."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from ..raster import BinaryMask, ProbabilityMap


def mask_to_png_b64(mask: BinaryMask) -> str:
    buf = io.BytesIO()
    plane = np.where(mask.array, 255, 0).astype(np.uint8)
    Image.fromarray(plane, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def mask_from_png_b64(data: str) -> BinaryMask:
    raw = base64.b64decode(data)
    with Image.open(io.BytesIO(raw)) as img:
        plane = np.asarray(img.convert("L"))
    return BinaryMask.from_array(plane != 0)


def image_to_png_b64(pixels: np.ndarray) -> str:
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def image_from_png_b64(data: str) -> np.ndarray:
    raw = base64.b64decode(data)
    with Image.open(io.BytesIO(raw)) as img:
        return np.asarray(img.convert("RGB"))


def values_to_b64(prob: ProbabilityMap) -> str:
    """Row-major little-endian float32 dump of a probability plane."""
    return base64.b64encode(prob.values.astype("<f4").tobytes(order="C")).decode("ascii")


def values_from_b64(data: str, width: int, height: int) -> np.ndarray:
    raw = base64.b64decode(data)
    expected = 4 * width * height
    if len(raw) != expected:
        raise ValueError(f"expected {expected} bytes of float32 values, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f4").reshape(height, width).astype(np.float64)
