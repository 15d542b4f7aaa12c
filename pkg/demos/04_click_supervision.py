"""Iterative click-supervision generation against a promptable segmenter.

Each round diffs the current prediction against the target, finds the most
interior pixel of the error region via the distance transform, places one
click there (positive inside missing area, negative inside excess area), and
re-segments with all clicks so far. The loop stops at IoU >= tau or after the
click budget runs out. The resulting click sets train or prompt downstream
segmenters; the textual wire form is what a language model would emit.

Run:  python3 demos/04_click_supervision.py [--mode sample|argmax] [--seed N]
"""

import argparse

import numpy as np

from maskfuse import BinaryMask, generate_click_sequence, serialize_clicks_text
from maskfuse.providers import GroundTruthOracle

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--mode", choices=("sample", "argmax"), default="sample",
                    help="how to pick among error pixels (default: sample)")
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

# A target with two separate parts: one click can only ever recover one part,
# so the generator has to keep going.
arr = np.zeros((48, 48), dtype=bool)
arr[6:18, 6:20] = True
arr[30:42, 28:44] = True
gt = BinaryMask.from_array(arr)

oracle = GroundTruthOracle.from_mask(gt)  # answers clicks exactly
rng = np.random.default_rng(args.seed)

clicks, trace = generate_click_sequence(None, gt, oracle, rng=rng, mode=args.mode)
print(f"target: two components, {gt.count} px total")
for i, step in enumerate(trace.steps, start=1):
    print(f"  step {i}: {step.click.polarity} click at ({step.click.x}, {step.click.y})"
          f" -> IoU {step.iou_after:.3f}")
print(f"terminated by {trace.terminated_by} at IoU {trace.final_iou:.3f}")
print("wire form:", serialize_clicks_text(clicks))
print()

# Against an imperfect segmenter (it shaves one boundary pixel unless a
# positive click lands exactly on the boundary), the generator spends extra
# clicks steering it to the exact mask.
sloppy = GroundTruthOracle.from_mask(gt, behavior="erode1")
clicks2, trace2 = generate_click_sequence(
    None, gt, sloppy, rng=np.random.default_rng(args.seed), mode=args.mode
)
print("same target, boundary-shaving segmenter:")
for i, step in enumerate(trace2.steps, start=1):
    print(f"  step {i}: {step.click.polarity} at ({step.click.x}, {step.click.y})"
          f" -> IoU {step.iou_after:.3f}")
print(f"terminated by {trace2.terminated_by} at IoU {trace2.final_iou:.3f}")
print("wire form:", serialize_clicks_text(clicks2))
