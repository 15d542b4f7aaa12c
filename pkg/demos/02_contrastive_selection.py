"""Contrastive mask selection: snap noisy per-pixel evidence onto proposals.

A text-image model gives a blurry per-pixel probability map; a promptable
segmenter gives sharp but uncommitted mask proposals. Selection admits every
proposal whose pixels, by strict majority, agree with the evidence, and the
answer is the union of what was admitted. The multi-class variant paints each
proposal whole with its plurality class.

Run:  python3 demos/02_contrastive_selection.py
"""

import numpy as np

from maskfuse import (
    BinaryMask,
    ClassPrompts,
    LabelMap,
    ProbabilityMap,
    ProposalSet,
    compose_multiclass,
    dominant_class,
    fraction_above,
    pixel_argmax,
    select_masks,
)

rng = np.random.default_rng(42)
SIZE = 32

# Ground truth we pretend not to know: a box (class 1) and a bar (class 2).
truth = np.zeros((SIZE, SIZE), dtype=np.int64)
truth[4:14, 4:14] = 1
truth[20:24, 2:30] = 2

# Sharp proposals, as a class-agnostic segmenter would produce: the two real
# shapes plus a distractor patch that covers mostly background.
proposals = []
for label in (1, 2):
    proposals.append(BinaryMask.from_array(truth == label))
distractor = np.zeros((SIZE, SIZE), dtype=bool)
distractor[10:20, 18:30] = True
proposals.append(BinaryMask.from_array(distractor))
pset = ProposalSet(proposals=tuple(proposals), source_grid=29)

# Blurry evidence: the true indicator for class 1, pushed around by noise.
evidence = (truth == 1).astype(np.float64)
evidence = np.clip(evidence + rng.normal(0.0, 0.22, evidence.shape), 0.0, 1.0)
pm = ProbabilityMap(width=SIZE, height=SIZE, values=evidence)

print("single-class selection for 'the box':")
for i, prop in enumerate(pset.proposals):
    frac = fraction_above(prop, pm, 0.5)
    verdict = "admit" if frac > 0.5 else "reject"
    print(f"  proposal {i}: {prop.count:4d} px, {frac:.2f} above threshold -> {verdict}")
selected = select_masks(pset, pm)
target = BinaryMask.from_array(truth == 1)
print(f"  selected {selected.count} px; equals the true box: {selected == target}")

# Multi-class: one probability map per class, argmax per pixel, then paint
# proposals with their dominant class (background-dominant ones are dropped).
prompts = ClassPrompts(("background", "box", "bar"))
maps = []
for label in range(3):
    values = (truth == label).astype(np.float64)
    values = np.clip(values + rng.normal(0.0, 0.15, values.shape), 0.0, 1.0)
    maps.append(ProbabilityMap(width=SIZE, height=SIZE, values=values))
labels = pixel_argmax(maps, prompts)

for i, prop in enumerate(pset.proposals):
    cls = dominant_class(prop, labels)
    print(f"proposal {i} leans to class {cls} ({prompts.names[cls]})")

pred = compose_multiclass(pset, labels, uncovered="background")
gt = LabelMap(width=SIZE, height=SIZE, labels=truth, background_index=0, class_count=3)
agree = (pred.labels == gt.labels).mean()
print(f"composed prediction agrees with the truth on {agree:.1%} of pixels")
print("(the distractor proposal leans background, so it never paints anything)")
