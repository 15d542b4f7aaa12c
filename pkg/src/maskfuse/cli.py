"""Command-line front end.

Subcommands map one-to-one onto the pipeline entry points, plus ``viz`` for
rendering overlays.  Every run-configuration field is exposed as a flag; the
resolution order is defaults, then ``--config`` file, then ``MF_*``
environment variables, then flags.

Exit codes: 0 on success, 1 when a run produced no usable result (or an
unexpected error), 2 for configuration and manifest problems.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .clicks import trace_from_json
from .config import ConfigError, RunConfig, load_config
from .evaluation import ManifestError, load_manifest
from .io import load_class_prompts, load_image_rgb, load_labelmap_png, load_mask_png, save_image_rgb
from .pipeline import prediction_name, run_clickgen, run_eval, run_ovss, run_refer
from .viz import render_label_overlay, render_overlay, trace_frames


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="JSON file of run-configuration keys")
    group = parser.add_argument_group("run-configuration overrides")
    for field in fields(RunConfig):
        flag = "--" + field.name.replace("_", "-")
        annotation = str(field.type)
        if annotation.startswith("bool"):
            group.add_argument(flag, dest=field.name, action=argparse.BooleanOptionalAction, default=None)
        elif annotation.startswith("int"):
            group.add_argument(flag, dest=field.name, type=int, default=None, metavar="N")
        elif annotation.startswith("float"):
            group.add_argument(flag, dest=field.name, type=float, default=None, metavar="X")
        else:
            group.add_argument(flag, dest=field.name, default=None, metavar="S")


def _config_from(args: argparse.Namespace) -> RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
    return load_config(args.config, overrides=overrides)


def _print_failures(report: dict, limit: int = 3) -> None:
    failed = report["items"]["failed"]
    for failure in failed[:limit]:
        print(f"  failed item {failure['index']} ({failure['image']}): {failure['error']}")
    if len(failed) > limit:
        print(f"  ... and {len(failed) - limit} more")


def _print_metrics(report: dict) -> None:
    metrics = report.get("metrics", {})
    if "miou" in metrics:
        print(f"miou: {metrics['miou']}")
    if "fg_iou" in metrics:
        print(f"foreground iou: {metrics['fg_iou']}")


def _finish_run(report: dict, out_dir) -> int:
    items = report["items"]
    print(f"{report['task']} over {report['dataset']}: {items['evaluated']}/{items['total']} items "
          f"in {report['wall_clock_s']}s")
    _print_failures(report)
    _print_metrics(report)
    if out_dir is not None:
        print(f"outputs in {out_dir}")
    return 1 if items["total"] > 0 and items["evaluated"] == 0 else 0


def _cmd_ovss(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    out_dir = args.out if args.out is not None else cfg.output_dir
    return _finish_run(run_ovss(cfg, args.manifest, out_dir=out_dir), out_dir)


def _cmd_refer(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    out_dir = args.out if args.out is not None else cfg.output_dir
    return _finish_run(run_refer(cfg, args.manifest, out_dir=out_dir), out_dir)


def _cmd_clickgen(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    out_dir = args.out if args.out is not None else cfg.output_dir
    summary = run_clickgen(cfg, args.manifest, out_dir=out_dir)
    items = summary["items"]
    print(f"clickgen over {summary['dataset']}: {items['evaluated']}/{items['total']} items "
          f"in {summary['wall_clock_s']}s")
    _print_failures(summary)
    stats = summary["clicks"]
    print(f"mean steps: {stats['mean_steps']}  mean final iou: {stats['mean_final_iou']}")
    print(f"terminated: {stats['terminated']['threshold']} by threshold, "
          f"{stats['terminated']['budget']} by budget")
    print(f"outputs in {out_dir}")
    return 1 if items["total"] > 0 and items["evaluated"] == 0 else 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    report = run_eval(cfg, args.manifest, args.pred_dir, out_dir=args.out, csv_path=args.csv)
    code = _finish_run(report, args.out)
    if args.csv is not None:
        print(f"per-class table in {args.csv}")
    return code


def _viz_traces(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    root = Path(args.images_root) if args.images_root else Path(args.traces).resolve().parent
    written = 0
    with open(args.traces, "r", encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    for index, row in enumerate(rows):
        image_path = Path(row["image"])
        if not image_path.is_absolute():
            image_path = root / image_path
        image = load_image_rgb(image_path)
        trace = trace_from_json(row)
        gt = None
        if args.gt_dir is not None:
            gt = load_mask_png(Path(args.gt_dir) / f"{image_path.stem}.png")
        for step, frame in enumerate(trace_frames(image, trace, gt=gt, alpha=args.alpha)):
            save_image_rgb(frame, out / f"{index:05d}_step{step + 1:02d}.png")
            written += 1
    print(f"wrote {written} frames to {out}")
    return 0


def _viz_predictions(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = load_manifest(args.manifest)
    root = Path(args.manifest).resolve().parent
    pred_dir = Path(args.pred_dir)
    prompt_cache = {}
    for index, record in enumerate(records):
        image_path = Path(record.image)
        if not image_path.is_absolute():
            image_path = root / image_path
        image = load_image_rgb(image_path)
        name = prediction_name(index, record.image)
        if record.task == "ovss":
            classes_path = Path(record.classes)
            if not classes_path.is_absolute():
                classes_path = root / classes_path
            if classes_path not in prompt_cache:
                prompt_cache[classes_path] = load_class_prompts(classes_path)
            prompts = prompt_cache[classes_path]
            labels = load_labelmap_png(
                pred_dir / name, prompts.class_count, background_index=prompts.background_index
            )
            frame = render_label_overlay(image, labels, alpha=args.alpha)
        else:
            frame = render_overlay(image, mask=load_mask_png(pred_dir / name), alpha=args.alpha)
        save_image_rgb(frame, out / name)
    print(f"wrote {len(records)} overlays to {out}")
    return 0


def _cmd_viz(args: argparse.Namespace) -> int:
    if args.traces is not None:
        return _viz_traces(args)
    if args.manifest is not None and args.pred_dir is not None:
        return _viz_predictions(args)
    raise ConfigError("viz needs either --traces or both --manifest and --pred-dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskfuse",
        description="Training-free segmentation orchestration: contrastive mask "
        "selection, click-driven segmentation, click-supervision generation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ovss = sub.add_parser("ovss", help="open-vocabulary segmentation over a manifest")
    ovss.add_argument("--manifest", required=True, metavar="JSONL")
    ovss.add_argument("--out", metavar="DIR", help="output directory (default: the configured output_dir)")
    _add_config_flags(ovss)
    ovss.set_defaults(func=_cmd_ovss)

    refer = sub.add_parser("refer", help="referred-object segmentation through the click protocol")
    refer.add_argument("--manifest", required=True, metavar="JSONL")
    refer.add_argument("--out", metavar="DIR")
    _add_config_flags(refer)
    refer.set_defaults(func=_cmd_refer)

    clickgen = sub.add_parser("clickgen", help="generate click supervision for a manifest")
    clickgen.add_argument("--manifest", required=True, metavar="JSONL")
    clickgen.add_argument("--out", metavar="DIR")
    _add_config_flags(clickgen)
    clickgen.set_defaults(func=_cmd_clickgen)

    evaluate = sub.add_parser("eval", help="re-score stored predictions against a manifest")
    evaluate.add_argument("--manifest", required=True, metavar="JSONL")
    evaluate.add_argument("--pred-dir", required=True, metavar="DIR")
    evaluate.add_argument("--out", metavar="DIR")
    evaluate.add_argument("--csv", metavar="FILE", help="also write a per-class IoU table")
    _add_config_flags(evaluate)
    evaluate.set_defaults(func=_cmd_eval)

    viz = sub.add_parser("viz", help="render overlays for traces or stored predictions")
    viz.add_argument("--traces", metavar="JSONL", help="click traces to render step by step")
    viz.add_argument("--images-root", metavar="DIR", help="base for relative image paths in traces")
    viz.add_argument("--gt-dir", metavar="DIR", help="tint ground-truth masks named <image stem>.png")
    viz.add_argument("--manifest", metavar="JSONL", help="render stored predictions for this manifest")
    viz.add_argument("--pred-dir", metavar="DIR")
    viz.add_argument("--out", required=True, metavar="DIR")
    viz.add_argument("--alpha", type=float, default=0.45)
    viz.set_defaults(func=_cmd_viz)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime faults: missing files, provider errors...
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
