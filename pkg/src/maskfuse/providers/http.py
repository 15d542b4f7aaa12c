"""HTTP providers speaking the JSON-over-POST capability protocol.

Every call POSTs a JSON body and expects a JSON reply.  Transport faults and
5xx replies are retried twice with exponential backoff; 4xx replies are never
retried.  Each logical call carries one idempotency key that stays stable
across its retries, so a server that already performed the work can answer
from cache.  A per-handle semaphore bounds in-flight requests.
"""

from __future__ import annotations

import threading
import time
import uuid

import numpy as np
import requests

from ..clicks import ClickSet
from ..contrastive import ClassPrompts
from ..raster import BinaryMask, ProbabilityMap
from ..tiling import Rect
from .base import (
    CLICK_SUGGEST,
    MASK_PROPOSALS,
    PROBABILITY_MAP,
    SEGMENT,
    ProviderHandle,
    ProviderSchemaError,
    ProviderStatusError,
    ProviderTransportError,
)
from .wire import image_to_png_b64, mask_from_png_b64, values_from_b64

_RETRIES = 2  # additional attempts after the first


class _HttpCall:
    """Shared POST/retry machinery for the concrete capability clients."""

    def __init__(self, handle: ProviderHandle, session: requests.Session | None = None):
        if handle.backend != "http":
            raise ValueError(f"handle for {handle.capability} is not an http handle")
        self.handle = handle
        self.session = session or requests.Session()
        self._gate = threading.Semaphore(handle.concurrency_limit)

    def post(self, payload: dict) -> dict:
        handle = self.handle
        headers = {"Idempotency-Key": uuid.uuid4().hex}
        if handle.token:
            headers["Authorization"] = f"Bearer {handle.token}"
        last_fault = ""
        for attempt in range(_RETRIES + 1):
            if attempt:
                time.sleep(handle.retry_backoff * 2 ** (attempt - 1))
            try:
                with self._gate:
                    resp = self.session.post(
                        handle.endpoint, json=payload, headers=headers, timeout=handle.timeout
                    )
            except requests.RequestException as exc:
                last_fault = str(exc)
                continue
            if resp.status_code == 200:
                try:
                    body = resp.json()
                except ValueError as exc:
                    raise ProviderSchemaError(
                        f"reply is not JSON: {exc}",
                        capability=handle.capability,
                        endpoint=handle.endpoint,
                    ) from exc
                if not isinstance(body, dict):
                    raise ProviderSchemaError(
                        "reply is not a JSON object",
                        capability=handle.capability,
                        endpoint=handle.endpoint,
                    )
                return body
            if 400 <= resp.status_code < 500:
                raise ProviderStatusError(
                    f"request rejected with status {resp.status_code}: {resp.text[:200]}",
                    status=resp.status_code,
                    capability=handle.capability,
                    endpoint=handle.endpoint,
                )
            last_fault = f"status {resp.status_code}"
            if attempt == _RETRIES:
                raise ProviderStatusError(
                    f"server kept failing after {_RETRIES + 1} attempts ({last_fault})",
                    status=resp.status_code,
                    capability=handle.capability,
                    endpoint=handle.endpoint,
                )
        raise ProviderTransportError(
            f"no response after {_RETRIES + 1} attempts ({last_fault})",
            capability=handle.capability,
            endpoint=handle.endpoint,
        )

    def schema_error(self, message: str) -> ProviderSchemaError:
        return ProviderSchemaError(
            message, capability=self.handle.capability, endpoint=self.handle.endpoint
        )

    def field(self, body: dict, key: str, kind: type):
        value = body.get(key)
        if not isinstance(value, kind) or isinstance(value, bool):
            raise self.schema_error(f"reply field {key!r} missing or not {kind.__name__}")
        return value


def _crop(image: np.ndarray, region: Rect | None) -> np.ndarray:
    if region is None:
        return image
    x, y, w, h = region
    return image[y : y + h, x : x + w]


class HttpProbabilityMaps:
    def __init__(self, handle: ProviderHandle, session=None):
        if handle.capability != PROBABILITY_MAP:
            raise ValueError(f"expected a {PROBABILITY_MAP} handle")
        self._call = _HttpCall(handle, session)

    def probability_maps(
        self, image: np.ndarray, classes: ClassPrompts, long_side: int, region: Rect | None = None
    ) -> list[ProbabilityMap]:
        body = self._call.post(
            {
                "image_png_b64": image_to_png_b64(_crop(image, region)),
                "classes": list(classes.names),
                "long_side": long_side,
            }
        )
        width = self._call.field(body, "width", int)
        height = self._call.field(body, "height", int)
        encoded = self._call.field(body, "maps", list)
        if len(encoded) != classes.class_count:
            raise self._call.schema_error(
                f"expected {classes.class_count} maps, server sent {len(encoded)}"
            )
        maps = []
        for i, blob in enumerate(encoded):
            try:
                values = values_from_b64(blob, width, height)
                maps.append(ProbabilityMap(width=width, height=height, values=values))
            except (ValueError, TypeError) as exc:
                raise self._call.schema_error(f"map {i} is malformed: {exc}") from exc
        return maps


class HttpMaskProposals:
    def __init__(self, handle: ProviderHandle, session=None):
        if handle.capability != MASK_PROPOSALS:
            raise ValueError(f"expected a {MASK_PROPOSALS} handle")
        self._call = _HttpCall(handle, session)

    def mask_proposals(
        self, image: np.ndarray, grid_n: int, region: Rect | None = None
    ) -> list[BinaryMask]:
        body = self._call.post(
            {"image_png_b64": image_to_png_b64(_crop(image, region)), "grid_n": grid_n}
        )
        encoded = self._call.field(body, "masks", list)
        masks = []
        for i, blob in enumerate(encoded):
            try:
                masks.append(mask_from_png_b64(blob))
            except Exception as exc:
                raise self._call.schema_error(f"mask {i} is malformed: {exc}") from exc
        return masks


class HttpSegmenter:
    def __init__(self, handle: ProviderHandle, session=None):
        if handle.capability != SEGMENT:
            raise ValueError(f"expected a {SEGMENT} handle")
        self._call = _HttpCall(handle, session)

    def segment(
        self, image: np.ndarray, clicks: ClickSet, region: Rect | None = None
    ) -> BinaryMask:
        body = self._call.post(
            {
                "image_png_b64": image_to_png_b64(_crop(image, region)),
                "positive": [[x, y] for x, y in clicks.positives],
                "negative": [[x, y] for x, y in clicks.negatives],
            }
        )
        blob = self._call.field(body, "mask_png_b64", str)
        try:
            return mask_from_png_b64(blob)
        except Exception as exc:
            raise self._call.schema_error(f"mask payload is malformed: {exc}") from exc


class HttpClickSuggester:
    def __init__(self, handle: ProviderHandle, session=None):
        if handle.capability != CLICK_SUGGEST:
            raise ValueError(f"expected a {CLICK_SUGGEST} handle")
        self._call = _HttpCall(handle, session)

    def suggest(self, image: np.ndarray, question: str, max_clicks: int) -> str:
        body = self._call.post(
            {
                "image_png_b64": image_to_png_b64(image),
                "question": question,
                "max_clicks": max_clicks,
            }
        )
        return self._call.field(body, "raw_text", str)
