"""Acceptance checks.

Nine criteria, one test each, every one printing a single pass/fail line
(bypassing pytest's capture so the lines always show).  Oracles here are
deliberately naive reimplementations — pixel loops, exhaustive searches —
kept independent of the library code they check.
"""

import dataclasses
import time

import numpy as np
import pytest

from test_pipeline import write_ovss_dataset, write_refer_dataset, rect_mask

from maskfuse.clicks import (
    ClickSet,
    generate_click_sequence,
    parse_clicks_text,
    serialize_clicks_text,
)
from maskfuse.config import RunConfig
from maskfuse.contrastive import ProposalSet, dominant_class, select_masks
from maskfuse.evaluation import ConfusionMatrix, accumulate, fg_iou
from maskfuse.io import load_labelmap_png
from maskfuse.pipeline import default_provider_factory, prediction_name, run_clickgen, run_ovss
from maskfuse.providers import (
    CLICK_SUGGEST,
    MASK_PROPOSALS,
    PROBABILITY_MAP,
    SEGMENT,
    GroundTruthOracle,
    connected_components,
    HttpClickSuggester,
    HttpMaskProposals,
    HttpProbabilityMaps,
    HttpSegmenter,
    MockProviderServer,
    ProviderHandle,
    ProviderStatusError,
    ProviderTransportError,
)
from maskfuse.raster import BinaryMask, LabelMap, ProbabilityMap, distance_transform, iou
from maskfuse.tiling import (
    aggregate_windows,
    grid_clicks,
    merge_tiles,
    plan_tiles,
    plan_windows,
    scaled_dims,
)


def announce(capsys, number, description, check):
    try:
        check()
    except BaseException:
        with capsys.disabled():
            print(f"[criterion {number}] FAIL — {description}")
        raise
    with capsys.disabled():
        print(f"[criterion {number}] PASS — {description}")


# ---------------------------------------------------------------------------
# 1. proposal selection equals a brute-force pixel loop
# ---------------------------------------------------------------------------

def brute_force_selection(proposal_arrays, prob_values, threshold=0.5):
    """Admit a proposal iff strictly more than half its pixels exceed the
    threshold; the answer is the union of admitted proposals."""
    height, width = prob_values.shape
    out = np.zeros((height, width), dtype=bool)
    for arr in proposal_arrays:
        inside = 0
        above = 0
        for y in range(height):
            for x in range(width):
                if arr[y, x]:
                    inside += 1
                    if prob_values[y, x] > threshold:
                        above += 1
        if inside > 0 and 2 * above > inside:
            out |= arr
    return out


def random_proposal(rng, size):
    kind = rng.integers(0, 4)
    arr = np.zeros((size, size), dtype=bool)
    if kind == 0:  # rectangle
        x, y = rng.integers(0, size - 2, 2)
        w, h = rng.integers(1, size - max(x, y), 2)
        arr[y : y + h, x : x + w] = True
    elif kind == 1:  # speckle
        arr = rng.random((size, size)) < rng.uniform(0.05, 0.6)
    elif kind == 2:  # full frame
        arr[:] = True
    # kind == 3 stays empty
    return arr


def test_criterion_1_selection_matches_pixel_loop(capsys):
    def check():
        rng = np.random.default_rng(1001)
        started = time.perf_counter()
        for _ in range(1000):
            size = 32
            prob = rng.random((size, size))
            # pull some values to the exact threshold to probe strictness
            ties = rng.random((size, size)) < 0.1
            prob[ties] = 0.5
            arrays = [random_proposal(rng, size) for _ in range(int(rng.integers(1, 5)))]
            pset = ProposalSet(
                proposals=tuple(BinaryMask.from_array(a) for a in arrays), source_grid=0
            )
            pm = ProbabilityMap(width=size, height=size, values=prob)
            got = select_masks(pset, pm)
            want = brute_force_selection(arrays, prob)
            assert np.array_equal(got.array, want)
        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"took {elapsed:.1f}s, budget is 10s"

    announce(capsys, 1, "mask selection agrees with a brute-force pixel loop on 1000 cases", check)


# ---------------------------------------------------------------------------
# 2. end-to-end multi-class segmentation is exact on synthetic scenes
# ---------------------------------------------------------------------------

def test_criterion_2_end_to_end_scenes_score_perfectly(tmp_path, capsys):
    def check():
        manifest = write_ovss_dataset(tmp_path, 50, seed=2000)
        cfg = RunConfig(workers=4, oracle_distractors=5)
        started = time.perf_counter()
        report = run_ovss(cfg, manifest, out_dir=tmp_path / "out")
        elapsed = time.perf_counter() - started
        assert report["items"]["failed"] == []
        assert report["metrics"]["miou"] == 1.0
        assert elapsed < 30.0, f"took {elapsed:.1f}s, budget is 30s"

        # guardrail: with only background-plurality proposals on offer, the
        # pipeline must refuse them all and predict pure background
        base = default_provider_factory(cfg)

        def distractors_only(index, record, gt):
            bundle = base(index, record, gt)

            def filtered(image, grid_n, region=None):
                x0, y0 = (0, 0) if region is None else region[:2]
                keep = []
                for mask in bundle.mask_proposals(image, grid_n, region=region):
                    patch = gt.labels[y0 : y0 + mask.height, x0 : x0 + mask.width]
                    if dominant_class(mask, LabelMap(
                        width=mask.width, height=mask.height, labels=patch,
                        background_index=gt.background_index, class_count=gt.class_count,
                    )) == gt.background_index:
                        keep.append(mask)
                return keep

            return dataclasses.replace(bundle, mask_proposals=filtered)

        sub = tmp_path / "distractors"
        small = write_ovss_dataset(tmp_path / "small", 5, seed=2100)
        report2 = run_ovss(cfg, small, out_dir=sub, provider_factory=distractors_only)
        assert report2["items"]["failed"] == []
        for i in range(5):
            pred = load_labelmap_png(sub / "predictions" / prediction_name(i, f"img{i}.png"), 5)
            assert not pred.labels.any(), "background-plurality proposals leaked into the output"

    announce(
        capsys, 2,
        "50 synthetic scenes segment to mIoU 1.0 and distractor proposals never leak",
        check,
    )


# ---------------------------------------------------------------------------
# 3. click generation contract
# ---------------------------------------------------------------------------

class OvershootSegmenter:
    """Returns the target dilated by one ring until a negative click arrives."""

    def __init__(self, gt: BinaryMask):
        self.gt = gt
        ring = np.zeros((gt.height, gt.width), dtype=bool)
        arr = gt.array
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                shifted = np.roll(np.roll(arr, dy, axis=0), dx, axis=1)
                if dy == -1:
                    shifted[-1, :] = False
                if dy == 1:
                    shifted[0, :] = False
                if dx == -1:
                    shifted[:, -1] = False
                if dx == 1:
                    shifted[:, 0] = False
                ring |= shifted
        self.dilated = BinaryMask.from_array(ring | arr)

    def segment(self, image, clicks: ClickSet) -> BinaryMask:
        if not clicks.positives:
            return BinaryMask.zeros(self.gt.width, self.gt.height)
        if clicks.negatives:
            return self.gt
        return self.dilated


def random_gt(rng, size=48):
    arr = np.zeros((size, size), dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        x, y = rng.integers(0, size - 6, 2)
        w, h = rng.integers(3, 12, 2)
        arr[y : min(y + h, size), x : min(x + w, size)] = True
    return BinaryMask.from_array(arr)


def test_criterion_3_click_generation_contract(tmp_path, capsys):
    def check():
        rng = np.random.default_rng(3000)
        singles = 0
        for case in range(200):
            gt = random_gt(rng)
            oracle = GroundTruthOracle.from_mask(gt)
            if case % 4 == 0:
                segmenter = OvershootSegmenter(gt)
            else:
                segmenter = oracle
            clicks, trace = generate_click_sequence(
                None, gt, segmenter, rng=np.random.default_rng((3000, case))
            )
            assert 1 <= len(trace.steps) <= 6
            assert len(clicks.positives) + len(clicks.negatives) == len(trace.steps)
            for x, y in clicks.positives:
                assert gt.contains(x, y), "positive click outside the target"
            for x, y in clicks.negatives:
                assert not gt.contains(x, y), "negative click inside the target"
            if segmenter is oracle:
                # an exact segmenter with a single-component target needs one click
                if len(connected_components(gt)) == 1:
                    singles += 1
                    assert len(trace.steps) == 1
                    assert trace.final_iou == 1.0
                    assert trace.terminated_by == "threshold"
        assert singles > 10, "the case mix never produced single-component targets"

        # rerunning a generation job reproduces its outputs byte for byte
        manifest = write_refer_dataset(
            tmp_path, [rect_mask(4 + i, 6, 10, 9 + (i % 3)) for i in range(20)]
        )
        cfg = RunConfig(workers=4, seed=11)
        run_clickgen(cfg, manifest, out_dir=tmp_path / "a")
        run_clickgen(cfg, manifest, out_dir=tmp_path / "b")
        for name in ("clicks.jsonl", "traces.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    announce(
        capsys, 3,
        "click sequences stay within budget, respect polarity, and regenerate byte-identically",
        check,
    )


# ---------------------------------------------------------------------------
# 4. distance transform is exact
# ---------------------------------------------------------------------------

def exhaustive_squared_distances(arr):
    """Nearest non-mask pixel over the frame extended by one ring on every side.

    Any pixel beyond the ring is dominated by clamping it onto the ring, so
    searching the extended rectangle exhaustively gives the true minimum.
    """
    height, width = arr.shape
    out = np.zeros((height, width), dtype=np.int64)
    for y in range(height):
        for x in range(width):
            if not arr[y, x]:
                continue
            best = None
            for yy in range(-1, height + 1):
                for xx in range(-1, width + 1):
                    off_frame = yy < 0 or yy >= height or xx < 0 or xx >= width
                    if off_frame or not arr[yy, xx]:
                        d = (yy - y) ** 2 + (xx - x) ** 2
                        if best is None or d < best:
                            best = d
            out[y, x] = best
    return out


def test_criterion_4_distance_transform_is_exact(capsys):
    def check():
        rng = np.random.default_rng(4000)
        for case in range(500):
            h = int(rng.integers(1, 13))
            w = int(rng.integers(1, 13))
            if case < 3:  # pin the degenerate fills
                arr = np.full((h, w), case % 2 == 0)
            else:
                arr = rng.random((h, w)) < rng.uniform(0.2, 0.95)
            field = distance_transform(BinaryMask.from_array(arr))
            assert np.array_equal(field.squared, exhaustive_squared_distances(arr))
            assert np.allclose(field.values, np.sqrt(field.squared.astype(np.float64)))

    announce(capsys, 4, "euclidean distances match an exhaustive nearest-outside search", check)


# ---------------------------------------------------------------------------
# 5. click text round-trips
# ---------------------------------------------------------------------------

def test_criterion_5_click_text_round_trip(capsys):
    def check():
        rng = np.random.default_rng(5000)
        for _ in range(10_000):
            clicks = ClickSet(
                positives=tuple(
                    (int(x), int(y)) for x, y in rng.integers(0, 2000, (int(rng.integers(0, 5)), 2))
                ),
                negatives=tuple(
                    (int(x), int(y)) for x, y in rng.integers(0, 2000, (int(rng.integers(0, 5)), 2))
                ),
            )
            assert parse_clicks_text(serialize_clicks_text(clicks)) == clicks
        assert parse_clicks_text("Positive: [(331, 420), (498, 272)], Negative: [(12, 55)]") == ClickSet(
            positives=((331, 420), (498, 272)), negatives=((12, 55),)
        )
        assert parse_clicks_text("Positive: [(10, 20)], Negative: []") == ClickSet(
            positives=((10, 20),)
        )

    announce(capsys, 5, "serialize/parse is the identity on 10,000 random click sets", check)


# ---------------------------------------------------------------------------
# 6. window and tile geometry
# ---------------------------------------------------------------------------

def test_criterion_6_window_and_tile_geometry(capsys):
    def check():
        rng = np.random.default_rng(6000)
        for _ in range(100):
            w = int(rng.integers(5, 65))
            h = int(rng.integers(5, 65))
            mask = BinaryMask.from_array(rng.random((h, w)) < 0.5)
            plan = plan_tiles(w, h, int(rng.integers(3, 20)))
            tiles = [
                BinaryMask.from_array(mask.array[y : y + th, x : x + tw])
                for x, y, tw, th in plan.rects
            ]
            assert merge_tiles(tiles, plan) == mask

            window = int(rng.integers(2, min(w, h) + 1))
            stride = int(rng.integers(1, window + 1))
            wplan = plan_windows(w, h, window, stride)
            constant = float(rng.random())
            partials = [
                ProbabilityMap(width=ww, height=wh, values=np.full((wh, ww), constant))
                for _, _, ww, wh in wplan.rects
            ]
            merged = aggregate_windows(partials, wplan)
            assert (merged.values == constant).all(), "constant maps must merge exactly"

        assert len(plan_windows(448, 448, 224, 112).rects) == 9

    announce(capsys, 6, "tile splits invert exactly and 448/224/112 yields 9 windows", check)


# ---------------------------------------------------------------------------
# 7. click grid sizes
# ---------------------------------------------------------------------------

def test_criterion_7_click_grid_sizes(capsys):
    def check():
        for n, count in ((10, 100), (20, 400), (29, 841)):
            for w, h in ((448, 448), (448, 224), (640, 480)):
                points = grid_clicks(w, h, n)
                assert len(points) == count
                assert len(set(points)) == count, "grid points must be distinct"
                assert all(0 <= x < w and 0 <= y < h for x, y in points)

    announce(capsys, 7, "prompt grids carry 100, 400 and 841 in-frame points", check)


# ---------------------------------------------------------------------------
# 8. confusion-matrix foreground IoU equals the set-based IoU
# ---------------------------------------------------------------------------

def test_criterion_8_metric_equivalence(capsys):
    def check():
        rng = np.random.default_rng(8000)
        for case in range(200):
            if case == 0:
                gt_arr = np.zeros((24, 24), dtype=bool)
                pred_arr = np.zeros((24, 24), dtype=bool)
            else:
                gt_arr = rng.random((24, 24)) < rng.uniform(0.0, 1.0)
                pred_arr = rng.random((24, 24)) < rng.uniform(0.0, 1.0)
            gt = BinaryMask.from_array(gt_arr)
            pred = BinaryMask.from_array(pred_arr)
            cm = accumulate(
                ConfusionMatrix.zeros(2), LabelMap.from_mask(gt), LabelMap.from_mask(pred)
            )
            assert abs(fg_iou(cm) - iou(gt, pred)) <= 1e-12

        hand = accumulate(
            ConfusionMatrix.zeros(2),
            LabelMap.from_mask(BinaryMask.from_array(np.array([[True, True], [False, False]]))),
            LabelMap.from_mask(BinaryMask.from_array(np.array([[True, False], [True, False]]))),
        )
        assert hand.counts.tolist() == [[1, 1], [1, 1]]
        assert fg_iou(hand) == pytest.approx(1.0 / 3.0, abs=1e-15)

    announce(capsys, 8, "foreground IoU from the confusion matrix equals the set IoU", check)


# ---------------------------------------------------------------------------
# 9. provider protocol round-trips, retries and typed failures
# ---------------------------------------------------------------------------

def test_criterion_9_provider_protocol(capsys):
    def check():
        gt = LabelMap.from_mask(rect_mask(10, 14, 20, 12))
        oracle = GroundTruthOracle(gt=gt)
        image = np.zeros((64, 64, 3), dtype=np.uint8)
        from maskfuse.contrastive import ClassPrompts

        prompts = ClassPrompts(("background", "thing"))

        def handle(capability, server, **kwargs):
            return ProviderHandle(
                capability=capability,
                backend="http",
                endpoint=server.endpoint(capability),
                retry_backoff=0.0,
                **kwargs,
            )

        with MockProviderServer(oracle, token="sesame") as server:
            kw = {"token": "sesame"}
            maps_client = HttpProbabilityMaps(handle(PROBABILITY_MAP, server, **kw))
            props_client = HttpMaskProposals(handle(MASK_PROPOSALS, server, **kw))
            seg_client = HttpSegmenter(handle(SEGMENT, server, **kw))
            clicks_client = HttpClickSuggester(handle(CLICK_SUGGEST, server, **kw))

            maps = maps_client.probability_maps(image, prompts, long_side=64)
            local = oracle.probability_maps(image, prompts, 64)
            assert len(maps) == 2
            assert (maps[0].width, maps[0].height) == scaled_dims(64, 64, 64)
            for got, want in zip(maps, local):
                assert np.array_equal(got.values, want.values)

            proposals = props_client.mask_proposals(image, 29)
            assert [m.bits.tobytes() for m in proposals] == [
                m.bits.tobytes() for m in oracle.mask_proposals(image, 29)
            ]

            clicks = ClickSet(positives=((15, 18),))
            assert seg_client.segment(image, clicks) == oracle.segment(image, clicks)

            suggestion = clicks_client.suggest(image, "the block", 6)
            assert parse_clicks_text(suggestion) == parse_clicks_text(
                oracle.suggest(image, "the block", 6)
            )

            # two transient failures are absorbed; the key stays stable
            before = len(server.requests_seen)
            server.fail_next(2, kind="status")
            assert seg_client.segment(image, clicks) == oracle.segment(image, clicks)
            attempts = server.requests_seen[before:]
            assert len(attempts) == 3
            assert len({a["idempotency_key"] for a in attempts}) == 1

            # a third consecutive failure surfaces as a typed status error
            server.fail_next(3, kind="status")
            with pytest.raises(ProviderStatusError):
                seg_client.segment(image, clicks)

            # connection drops surface as transport errors
            server.fail_next(3, kind="close")
            with pytest.raises(ProviderTransportError):
                seg_client.segment(image, clicks)

            # client errors are not retried
            before = len(server.requests_seen)
            wrong = np.zeros((8, 8, 3), dtype=np.uint8)
            with pytest.raises(ProviderStatusError) as err:
                seg_client.segment(wrong, clicks)
            assert err.value.status == 400
            assert len(server.requests_seen) == before + 1

            # and a missing token is rejected up front
            bare = HttpSegmenter(handle(SEGMENT, server))
            with pytest.raises(ProviderStatusError) as err:
                bare.segment(image, clicks)
            assert err.value.status == 401

    announce(
        capsys, 9,
        "the HTTP protocol round-trips all four capabilities with retries and typed errors",
        check,
    )
