"""Manifest-driven runs.

Four entry points, one per workflow: open-vocabulary segmentation over mask
proposals (``run_ovss``), referred-object segmentation through the click
protocol (``run_refer``), click-supervision generation (``run_clickgen``),
and re-scoring of stored predictions (``run_eval``).  Each consumes a JSONL
manifest, fans items out over a thread pool, and returns a report dict; with
an output directory it also writes predictions and the report to disk.

Providers are resolved per capability: an exact oracle backend seeded from the
item's ground truth, or an HTTP client shared across items.  Tests and the
acceptance harness can inject a ``provider_factory`` to substitute their own.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace
from typing import Callable, Sequence

import numpy as np

from .clicks import clickset_to_json, ensemble_vote, generate_click_sequence, parse_clicks_any, trace_to_json
from .config import RunConfig
from .contrastive import ClassPrompts, ProposalSet, compose_multiclass, pixel_argmax
from .evaluation import (
    ConfusionMatrix,
    ManifestError,
    ManifestRecord,
    accumulate,
    load_manifest,
    metrics_block,
    round_metric,
    write_per_class_csv,
    write_report,
)
from .io import (
    load_class_prompts,
    load_image_rgb,
    load_labelmap_png,
    load_mask_png,
    save_labelmap_png,
    save_mask_png,
)
from .providers import (
    CLICK_SUGGEST,
    MASK_PROPOSALS,
    PROBABILITY_MAP,
    SEGMENT,
    GroundTruthOracle,
    HttpClickSuggester,
    HttpMaskProposals,
    HttpProbabilityMaps,
    HttpSegmenter,
    ProviderHandle,
)
from .raster import BinaryMask, LabelMap, ProbabilityMap
from .tiling import aggregate_windows, embed_mask, plan_tiles, plan_windows, resize_nearest, scaled_dims

BINARY_CLASS_NAMES = ("background", "foreground")


@dataclass(frozen=True)
class ProviderBundle:
    """The four capability entry points one item runs against."""

    probability_maps: Callable
    mask_proposals: Callable
    segment: Callable
    suggest: Callable


_HTTP_CLIENTS = {
    "probability_map": (PROBABILITY_MAP, HttpProbabilityMaps),
    "mask_proposals": (MASK_PROPOSALS, HttpMaskProposals),
    "segment": (SEGMENT, HttpSegmenter),
    "clicks": (CLICK_SUGGEST, HttpClickSuggester),
}


def default_provider_factory(cfg: RunConfig) -> Callable[[int, ManifestRecord, LabelMap], ProviderBundle]:
    """Capability resolution for a run.

    HTTP-backed capabilities share one client (connection pool, concurrency
    cap) across every item; oracle-backed ones get a fresh oracle wired to the
    item's ground truth, seeded per item so reruns reproduce exactly.
    """
    http: dict[str, object] = {}
    for field, (capability, cls) in _HTTP_CLIENTS.items():
        if getattr(cfg, f"{field}_backend") == "http":
            handle = ProviderHandle(
                capability=capability,
                backend="http",
                endpoint=getattr(cfg, f"{field}_endpoint"),
                timeout=cfg.http_timeout,
                concurrency_limit=cfg.http_concurrency,
                token=cfg.http_token,
                retry_backoff=cfg.http_retry_backoff,
            )
            http[field] = cls(handle)

    def factory(index: int, record: ManifestRecord, gt: LabelMap) -> ProviderBundle:
        oracle = GroundTruthOracle(
            gt=gt,
            seed=cfg.seed * 1_000_003 + index,
            noise=cfg.oracle_noise,
            distractors=cfg.oracle_distractors,
            behavior=cfg.oracle_behavior,
            click_format=cfg.oracle_click_format,
        )

        def pick(field: str, method: str):
            return getattr(http[field], method) if field in http else getattr(oracle, method)

        return ProviderBundle(
            probability_maps=pick("probability_map", "probability_maps"),
            mask_proposals=pick("mask_proposals", "mask_proposals"),
            segment=pick("segment", "segment"),
            suggest=pick("clicks", "suggest"),
        )

    return factory


def provider_echo(cfg: RunConfig) -> dict:
    """Which backend served each capability, for the report."""
    return {
        field: {
            "backend": getattr(cfg, f"{field}_backend"),
            "endpoint": getattr(cfg, f"{field}_endpoint"),
        }
        for field in _HTTP_CLIENTS
    }


# ---------------------------------------------------------------------------
# shared run machinery
# ---------------------------------------------------------------------------

def _resolve(root: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else root / p


def prediction_name(index: int, image_path: str) -> str:
    """Stable per-item prediction filename: zero-padded index plus image stem."""
    return f"{index:05d}_{Path(image_path).stem}.png"


def _run_items(cfg: RunConfig, records: Sequence[ManifestRecord], worker) -> tuple[list, list[dict]]:
    """Run ``worker(index, record)`` over all records on a bounded pool.

    Results come back in manifest order.  A failing item is recorded and
    skipped unless ``fail_fast`` is set, in which case the first failure
    propagates and the rest are cancelled.
    """
    results: list = [None] * len(records)
    failures: list[dict] = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = {pool.submit(worker, i, r): i for i, r in enumerate(records)}
        for fut in as_completed(futures):
            index = futures[fut]
            try:
                results[index] = fut.result()
            except Exception as exc:
                if cfg.fail_fast:
                    for other in futures:
                        other.cancel()
                    raise
                failures.append(
                    {
                        "index": index,
                        "image": records[index].image,
                        "error": f"{type(exc).__name__}: {exc}",
                    }
                )
    failures.sort(key=lambda f: f["index"])
    return results, failures


def _items_block(total: int, failures: list[dict]) -> dict:
    return {"total": total, "evaluated": total - len(failures), "failed": failures}


def _base_report(task: str, manifest_path, cfg: RunConfig, started: float) -> dict:
    return {
        "dataset": Path(manifest_path).stem,
        "task": task,
        "providers": provider_echo(cfg),
        "config": cfg.echo(),
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }


def _check_tasks(records: Sequence[ManifestRecord], allowed: tuple[str, ...], manifest_path) -> None:
    if not records:
        raise ManifestError(f"{manifest_path}: manifest has no records")
    for i, record in enumerate(records):
        if record.task not in allowed:
            raise ManifestError(
                f"{manifest_path}: record {i} has task {record.task!r}, expected one of {allowed}"
            )


def _load_pair(root: Path, record: ManifestRecord, gt_loader) -> tuple[np.ndarray, object]:
    gt = gt_loader(_resolve(root, record.gt_mask))
    image = load_image_rgb(_resolve(root, record.image))
    if image.shape[:2] != (gt.height, gt.width):
        raise ValueError(
            f"image is {image.shape[1]}x{image.shape[0]} but ground truth is {gt.width}x{gt.height}"
        )
    return image, gt


def _shared_prompts(root: Path, records: Sequence[ManifestRecord], manifest_path) -> ClassPrompts:
    """All records of one dataset must agree on the class list."""
    cache: dict[Path, ClassPrompts] = {}
    first: ClassPrompts | None = None
    for i, record in enumerate(records):
        path = _resolve(root, record.classes)
        if path not in cache:
            cache[path] = load_class_prompts(path)
        prompts = cache[path]
        if first is None:
            first = prompts
        elif prompts != first:
            raise ManifestError(f"{manifest_path}: record {i} uses a different class list")
    return first


# ---------------------------------------------------------------------------
# open-vocabulary segmentation
# ---------------------------------------------------------------------------

def ovss_predict(cfg: RunConfig, bundle: ProviderBundle, image: np.ndarray, prompts: ClassPrompts) -> LabelMap:
    """Predict a label map for one image.

    Class evidence is gathered per sliding window in the provider's scaled
    coordinate space and averaged back into one probability map per class;
    the per-pixel argmax is then snapped to mask proposals, each proposal
    painted whole with its dominant class.
    """
    height, width = image.shape[:2]
    pw, ph = scaled_dims(width, height, cfg.clip_long_side)
    window = min(cfg.window, pw, ph)
    stride = min(cfg.stride, window)
    plan = plan_windows(pw, ph, window, stride)

    per_class: list[list[ProbabilityMap]] = [[] for _ in prompts.names]
    for x, y, ww, wh in plan.rects:
        # the window's footprint in native pixels (outer bound)
        nx0, ny0 = (x * width) // pw, (y * height) // ph
        nx1 = -((-(x + ww) * width) // pw)
        ny1 = -((-(y + wh) * height) // ph)
        region = (nx0, ny0, nx1 - nx0, ny1 - ny0)
        partials = bundle.probability_maps(image, prompts, long_side=max(ww, wh), region=region)
        if len(partials) != prompts.class_count:
            raise ValueError(f"provider returned {len(partials)} maps for {prompts.class_count} classes")
        for class_index, pm in enumerate(partials):
            if (pm.width, pm.height) != (ww, wh):
                pm = ProbabilityMap(width=ww, height=wh, values=resize_nearest(pm.values, ww, wh))
            per_class[class_index].append(pm)

    full = [aggregate_windows(maps, plan) for maps in per_class]
    native = [
        pm
        if (pm.width, pm.height) == (width, height)
        else ProbabilityMap(width=width, height=height, values=resize_nearest(pm.values, width, height))
        for pm in full
    ]
    labels = pixel_argmax(native, prompts)

    proposals: list[BinaryMask] = []
    for tx, ty, tw, th in plan_tiles(width, height, cfg.tile_cap).rects:
        for mask in bundle.mask_proposals(image, cfg.grid_n, region=(tx, ty, tw, th)):
            if (mask.width, mask.height) != (tw, th):
                mask = BinaryMask.from_array(resize_nearest(mask.array, tw, th))
            proposals.append(embed_mask(mask, (tx, ty, tw, th), width, height))
    pset = ProposalSet(proposals=tuple(proposals), source_grid=cfg.grid_n)
    return compose_multiclass(pset, labels, uncovered=cfg.uncovered)


def run_ovss(cfg: RunConfig, manifest_path, *, out_dir=None, provider_factory=None) -> dict:
    """Open-vocabulary segmentation over a manifest; returns the report."""
    started = time.perf_counter()
    records = load_manifest(manifest_path)
    _check_tasks(records, ("ovss",), manifest_path)
    root = Path(manifest_path).resolve().parent
    prompts = _shared_prompts(root, records, manifest_path)
    factory = provider_factory or default_provider_factory(cfg)

    pred_dir = None
    if out_dir is not None:
        pred_dir = Path(out_dir) / "predictions"
        pred_dir.mkdir(parents=True, exist_ok=True)

    def worker(index: int, record: ManifestRecord) -> ConfusionMatrix:
        image, gt = _load_pair(
            root,
            record,
            lambda p: load_labelmap_png(p, prompts.class_count, background_index=prompts.background_index),
        )
        bundle = factory(index, record, gt)
        pred = ovss_predict(cfg, bundle, image, prompts)
        if pred_dir is not None:
            save_labelmap_png(pred, pred_dir / prediction_name(index, record.image))
        return accumulate(ConfusionMatrix.zeros(prompts.class_count), gt, pred)

    results, failures = _run_items(cfg, records, worker)
    cm = ConfusionMatrix.zeros(prompts.class_count)
    for item_cm in results:
        if item_cm is not None:
            cm = cm + item_cm

    report = {
        "items": _items_block(len(records), failures),
        "classes": list(prompts.names),
        "metrics": metrics_block(cm, prompts.names),
        **_base_report("ovss", manifest_path, cfg, started),
    }
    if out_dir is not None:
        write_report(report, Path(out_dir) / "report.json")
    return report


# ---------------------------------------------------------------------------
# referred-object segmentation
# ---------------------------------------------------------------------------

def run_refer(cfg: RunConfig, manifest_path, *, out_dir=None, provider_factory=None) -> dict:
    """Question-driven binary segmentation: suggest clicks, parse, segment.

    Records sharing a ``group`` describe the same target; their predictions
    are merged by per-pixel majority vote and scored once per group.
    """
    started = time.perf_counter()
    records = load_manifest(manifest_path)
    _check_tasks(records, ("refer", "reason"), manifest_path)
    root = Path(manifest_path).resolve().parent
    factory = provider_factory or default_provider_factory(cfg)

    pred_dir = None
    if out_dir is not None:
        pred_dir = Path(out_dir) / "predictions"
        pred_dir.mkdir(parents=True, exist_ok=True)

    def worker(index: int, record: ManifestRecord) -> tuple[BinaryMask, BinaryMask]:
        image, gt = _load_pair(root, record, load_mask_png)
        bundle = factory(index, record, LabelMap.from_mask(gt))
        raw = bundle.suggest(image, record.question, cfg.clicks_max)
        clicks = parse_clicks_any(raw, max_clicks=cfg.clicks_max if cfg.strict_clicks else None)
        pred = bundle.segment(image, clicks)
        if (pred.width, pred.height) != (gt.width, gt.height):
            pred = BinaryMask.from_array(resize_nearest(pred.array, gt.width, gt.height))
        if pred_dir is not None:
            save_mask_png(pred, pred_dir / prediction_name(index, record.image))
        return gt, pred

    results, failures = _run_items(cfg, records, worker)

    # fold grouped predictions into one vote each, keep singles as-is
    units: list[tuple[BinaryMask, BinaryMask]] = []
    grouped: dict[str, list[tuple[int, BinaryMask, BinaryMask]]] = {}
    for index, result in enumerate(results):
        if result is None:
            continue
        gt, pred = result
        group = records[index].group
        if group is None:
            units.append((gt, pred))
        else:
            grouped.setdefault(group, []).append((index, gt, pred))
    for group, members in grouped.items():
        gts = [gt for _, gt, _ in members]
        if any(gt != gts[0] for gt in gts[1:]):
            failures.append(
                {
                    "index": members[0][0],
                    "image": f"group:{group}",
                    "error": "ValueError: records in one group disagree on the ground truth",
                }
            )
            continue
        voted = ensemble_vote([pred for _, _, pred in members], ties_foreground=cfg.vote_ties_foreground)
        if pred_dir is not None:
            save_mask_png(voted, pred_dir / f"group_{group}.png")
        units.append((gts[0], voted))
    failures.sort(key=lambda f: f["index"])

    cm = ConfusionMatrix.zeros(2)
    for gt, pred in units:
        cm = accumulate(cm, LabelMap.from_mask(gt), LabelMap.from_mask(pred))

    report = {
        "items": _items_block(len(records), failures),
        "groups": {"count": len(grouped), "scored_units": len(units)},
        "metrics": metrics_block(cm, BINARY_CLASS_NAMES),
        **_base_report("refer", manifest_path, cfg, started),
    }
    if out_dir is not None:
        write_report(report, Path(out_dir) / "report.json")
    return report


# ---------------------------------------------------------------------------
# click-supervision generation
# ---------------------------------------------------------------------------

def run_clickgen(cfg: RunConfig, manifest_path, *, out_dir=None, provider_factory=None) -> dict:
    """Generate click supervision for every record; returns the summary.

    With an output directory, writes ``clicks.jsonl`` (one dataset record per
    item), ``traces.jsonl`` (per-step detail for inspection and rendering),
    and ``summary.json``.  Output is ordered by manifest index and every item
    is seeded from (seed, index), so reruns are byte-identical.
    """
    started = time.perf_counter()
    records = load_manifest(manifest_path)
    _check_tasks(records, ("ovss", "refer", "reason"), manifest_path)
    root = Path(manifest_path).resolve().parent
    factory = provider_factory or default_provider_factory(cfg)

    def worker(index: int, record: ManifestRecord) -> tuple[dict, dict]:
        image, gt = _load_pair(root, record, load_mask_png)
        bundle = factory(index, record, LabelMap.from_mask(gt))
        rng = np.random.default_rng((cfg.seed, index))
        clicks, trace = generate_click_sequence(
            image,
            gt,
            SimpleNamespace(segment=bundle.segment),
            max_iters=cfg.max_iters,
            tau=cfg.tau,
            rng=rng,
            mode=cfg.mode,
        )
        prompt = record.question or ""
        item = {
            "image": record.image,
            "prompt": prompt,
            "clicks": clickset_to_json(clicks),
            "final_iou": trace.final_iou,
            "steps": len(trace.steps),
        }
        return item, trace_to_json(trace, image=record.image, prompt=prompt)

    results, failures = _run_items(cfg, records, worker)
    kept = [r for r in results if r is not None]

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, column in (("clicks.jsonl", 0), ("traces.jsonl", 1)):
            with open(out / name, "w", encoding="utf-8") as fh:
                for row in kept:
                    fh.write(json.dumps(row[column], sort_keys=True) + "\n")

    steps = [item["steps"] for item, _ in kept]
    ious = [item["final_iou"] for item, _ in kept]
    by_threshold = sum(1 for _, trace in kept if trace["terminated_by"] == "threshold")
    summary = {
        "items": _items_block(len(records), failures),
        "clicks": {
            "mean_steps": round_metric(float(np.mean(steps)) if steps else float("nan")),
            "mean_final_iou": round_metric(float(np.mean(ious)) if ious else float("nan")),
            "terminated": {"threshold": by_threshold, "budget": len(kept) - by_threshold},
        },
        **_base_report("clickgen", manifest_path, cfg, started),
    }
    if out_dir is not None:
        write_report(summary, Path(out_dir) / "summary.json")
    return summary


# ---------------------------------------------------------------------------
# re-scoring stored predictions
# ---------------------------------------------------------------------------

def run_eval(cfg: RunConfig, manifest_path, pred_dir, *, out_dir=None, csv_path=None) -> dict:
    """Score stored predictions named ``<index>_<image stem>.png`` against a manifest.

    A manifest of ``ovss`` records is scored as label maps over its class
    list; ``refer``/``reason`` records are scored as binary masks.
    """
    started = time.perf_counter()
    records = load_manifest(manifest_path)
    if not records:
        raise ManifestError(f"{manifest_path}: manifest has no records")
    root = Path(manifest_path).resolve().parent
    pred_root = Path(pred_dir)

    if records[0].task == "ovss":
        _check_tasks(records, ("ovss",), manifest_path)
        prompts = _shared_prompts(root, records, manifest_path)
        names: Sequence[str] = prompts.names
        load_gt = lambda p: load_labelmap_png(p, prompts.class_count, background_index=prompts.background_index)
        load_pred = load_gt
        to_labels = lambda m: m
    else:
        _check_tasks(records, ("refer", "reason"), manifest_path)
        names = BINARY_CLASS_NAMES
        load_gt = load_mask_png
        load_pred = load_mask_png
        to_labels = LabelMap.from_mask

    def worker(index: int, record: ManifestRecord) -> ConfusionMatrix:
        gt = load_gt(_resolve(root, record.gt_mask))
        pred = load_pred(pred_root / prediction_name(index, record.image))
        return accumulate(ConfusionMatrix.zeros(len(names)), to_labels(gt), to_labels(pred))

    results, failures = _run_items(cfg, records, worker)
    cm = ConfusionMatrix.zeros(len(names))
    for item_cm in results:
        if item_cm is not None:
            cm = cm + item_cm

    report = {
        "items": _items_block(len(records), failures),
        "classes": list(names),
        "metrics": metrics_block(cm, names),
        **_base_report("eval", manifest_path, cfg, started),
    }
    if csv_path is not None:
        write_per_class_csv(cm, names, csv_path)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_report(report, Path(out_dir) / "report.json")
    return report
