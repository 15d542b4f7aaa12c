"""The HTTP provider protocol: wire formats, retries, typed failures.

Foundation models live behind four POST endpoints (probability maps, mask
proposals, promptable segmentation, click suggestion). This demo starts the
in-process reference server, points typed clients at it, and walks through
the happy path plus every failure mode a deployment will meet.

Run:  python3 demos/06_http_protocol.py
"""

import numpy as np

from maskfuse import ClassPrompts, ClickSet, parse_clicks_text
from maskfuse.providers import (
    CLICK_SUGGEST,
    MASK_PROPOSALS,
    PROBABILITY_MAP,
    SEGMENT,
    GroundTruthOracle,
    HttpClickSuggester,
    HttpProbabilityMaps,
    HttpMaskProposals,
    HttpSegmenter,
    MockProviderServer,
    ProviderHandle,
    ProviderStatusError,
    ProviderTransportError,
)
from maskfuse.raster import BinaryMask

# The reference server answers from a fixed ground truth, which makes every
# response predictable -- ideal for wiring checks before pointing the same
# clients at real model servers.
arr = np.zeros((64, 64), dtype=bool)
arr[20:44, 12:52] = True
oracle = GroundTruthOracle.from_mask(BinaryMask.from_array(arr))
image = np.zeros((64, 64, 3), dtype=np.uint8)

with MockProviderServer(oracle, token="demo-token") as server:
    print(f"server listening at {server.base_url}")

    def client(cls, capability):
        return cls(ProviderHandle(
            capability=capability,
            backend="http",
            endpoint=server.endpoint(capability),
            token="demo-token",
            retry_backoff=0.05,
        ))

    maps_client = client(HttpProbabilityMaps, PROBABILITY_MAP)
    props_client = client(HttpMaskProposals, MASK_PROPOSALS)
    seg_client = client(HttpSegmenter, SEGMENT)
    sugg_client = client(HttpClickSuggester, CLICK_SUGGEST)

    # 1. probability maps: one float map per class name, any long side
    maps = maps_client.probability_maps(image, ClassPrompts(("background", "block")), long_side=64)
    print(f"probability maps: {len(maps)} maps of {maps[0].width}x{maps[0].height}, "
          f"foreground mass {maps[1].values.sum():.0f} px")

    # 2. proposals: grid-prompted masks, decoded from PNG
    proposals = props_client.mask_proposals(image, grid_n=29)
    print(f"mask proposals: {len(proposals)} masks, largest {max(m.count for m in proposals)} px")

    # 3. promptable segmentation from clicks
    pred = seg_client.segment(image, ClickSet(positives=((30, 30),)))
    print(f"segment from one click: {pred.count} px "
          f"(target is {oracle.foreground.count} px)")

    # 4. click suggestion: free text in the standard wire form
    raw = sugg_client.suggest(image, "the block", max_clicks=6)
    print(f"suggested clicks: {raw!r} -> parsed {parse_clicks_text(raw).positives}")

    # --- failure handling ---------------------------------------------------
    # Transient server errors (5xx) and dropped connections are retried twice
    # with the same idempotency key; the call below survives two injected 500s.
    server.fail_next(2, kind="status")
    pred = seg_client.segment(image, ClickSet(positives=((30, 30),)))
    tail = server.requests_seen[-3:]
    print(f"\nsurvived two 500s: 3 attempts, idempotency keys "
          f"{[t['idempotency_key'][:8] for t in tail]}")

    # Three failures in a row exhaust the budget and surface as typed errors.
    server.fail_next(3, kind="status")
    try:
        seg_client.segment(image, ClickSet(positives=((30, 30),)))
    except ProviderStatusError as exc:
        print(f"persistent 5xx -> {type(exc).__name__} (status {exc.status})")
    server.fail_next(3, kind="close")
    try:
        seg_client.segment(image, ClickSet(positives=((30, 30),)))
    except ProviderTransportError as exc:
        print(f"dropped connections -> {type(exc).__name__}")

    # Client errors (4xx) are never retried: one bad request, one response.
    before = len(server.requests_seen)
    try:
        seg_client.segment(np.zeros((8, 8, 3), dtype=np.uint8), ClickSet(positives=((1, 1),)))
    except ProviderStatusError as exc:
        print(f"bad payload -> status {exc.status} after "
              f"{len(server.requests_seen) - before} attempt(s)")

print("\nserver stopped; the same clients work against any conforming deployment")
