"""Sliding windows, disjoint tiles, prompt grids, nearest-neighbour scaling.

Large frames are processed as overlapping windows in a provider's scaled
coordinate space (probabilities are averaged where windows overlap) and as
disjoint tiles for proposal generation (each tile is prompted with a uniform
click grid and the answers are embedded back).

Run:  python3 demos/03_windows_and_tiles.py
"""

import numpy as np

from maskfuse import (
    BinaryMask,
    ProbabilityMap,
    aggregate_windows,
    embed_mask,
    grid_clicks,
    merge_tiles,
    plan_tiles,
    plan_windows,
    resize_nearest,
    scaled_dims,
)

# --- the canonical geometry ------------------------------------------------
# A 448-long-side frame swept by 224-pixel windows at stride 112 gives a
# 3x3 arrangement: offsets 0, 112, 224 on each axis.
plan = plan_windows(448, 448, 224, 112)
print(f"448x448 / window 224 / stride 112 -> {len(plan.rects)} windows")
print("  offsets:", sorted({(x, y) for x, y, _, _ in plan.rects}))

# Uneven frames clamp the last window flush with the edge instead of padding.
plan2 = plan_windows(500, 300, 224, 112)
print(f"500x300 -> {len(plan2.rects)} windows, last = {plan2.rects[-1]}")

# --- averaging where windows overlap --------------------------------------
rng = np.random.default_rng(7)
full = rng.random((448, 448))
partials = [
    ProbabilityMap(width=w, height=h, values=full[y : y + h, x : x + w])
    for x, y, w, h in plan.rects
]
merged = aggregate_windows(partials, plan)
print("windows carved from one map merge back exactly:",
      bool(np.array_equal(merged.values, full)))

# --- prompt grids ----------------------------------------------------------
for n in (10, 20, 29):
    pts = grid_clicks(448, 448, n)
    print(f"grid n={n}: {len(pts)} click points, first {pts[0]}, last {pts[-1]}")

# --- tiles for proposal generation ----------------------------------------
mask = BinaryMask.from_array(rng.random((300, 500)) < 0.4)
tplan = plan_tiles(500, 300, 224)
tiles = [
    BinaryMask.from_array(mask.array[y : y + h, x : x + w]) for x, y, w, h in tplan.rects
]
print(f"500x300 with 224-pixel tiles -> {len(tplan.rects)} disjoint tiles")
print("split + merge is the identity:", merge_tiles(tiles, tplan) == mask)

# A proposal answered inside one tile embeds back at the tile's offset.
x, y, w, h = tplan.rects[-1]
local = BinaryMask.from_array(np.ones((h, w), dtype=bool))
placed = embed_mask(local, (x, y, w, h), 500, 300)
print(f"embedding a full {w}x{h} tile answer paints {placed.count} px of the frame")

# --- integer-centre scaling ------------------------------------------------
# Resampling picks centre-aligned source indices, so integer-factor round
# trips reproduce the original exactly (here 64 -> 448 -> 64, factor 7).
small = rng.random((64, 64))
print("64 -> 448 -> 64 nearest-neighbour round trip is exact:",
      bool(np.array_equal(resize_nearest(resize_nearest(small, 448, 448), 64, 64), small)))
print("scaled_dims keeps aspect:", scaled_dims(640, 480, 448))
