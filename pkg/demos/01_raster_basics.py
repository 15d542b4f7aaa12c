"""Core raster containers: bit-packed masks, IoU, exact distance transforms.

Run:  python3 demos/01_raster_basics.py
"""

import numpy as np

from maskfuse import BinaryMask, distance_transform, iou, mask_difference, mask_union

# Build two overlapping rectangles. Masks are stored bit-packed (one bit per
# pixel), so even large frames stay cheap to hold and compare.
a = np.zeros((12, 16), dtype=bool)
a[2:9, 2:10] = True
b = np.zeros((12, 16), dtype=bool)
b[5:11, 6:14] = True

left = BinaryMask.from_array(a)
right = BinaryMask.from_array(b)
print(f"left: {left.count} px, right: {right.count} px")
print(f"packed bytes per mask: {left.bits.nbytes} (vs {a.nbytes} unpacked)")

union = mask_union([left, right])
only_left = mask_difference(left, right)
print(f"union: {union.count} px, left-only: {only_left.count} px")
print(f"IoU(left, right) = {iou(left, right):.4f}")

# Set algebra round-trips exactly: (a - b) ∪ (a ∩ b) == a
from maskfuse import mask_intersection

rebuilt = mask_union([only_left, mask_intersection(left, right)])
print("difference/intersection rebuild the original:", rebuilt == left)

# The distance transform measures, for every foreground pixel, the exact
# euclidean distance to the nearest background pixel -- where anything beyond
# the frame also counts as background. Squared distances are exact integers.
field = distance_transform(union)
deepest = np.unravel_index(np.argmax(field.values), field.values.shape)
print(f"deepest interior pixel: (x={deepest[1]}, y={deepest[0]}), "
      f"distance {field.values[deepest]:.3f} (squared {field.squared[deepest]})")

print()
print("distance map (rounded):")
for row in field.values:
    print(" ".join(f"{v:3.0f}" for v in row))
