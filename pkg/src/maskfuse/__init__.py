"""maskfuse: text-guided segmentation orchestration over external model providers."""

from .clicks import (
    Click,
    ClickParseError,
    ClickSet,
    ClickTrace,
    ensemble_vote,
    generate_click_sequence,
    parse_clicks_any,
    parse_clicks_json,
    parse_clicks_text,
    sample_click,
    serialize_clicks_text,
)
from .config import ConfigError, RunConfig, load_config
from .contrastive import (
    ClassPrompts,
    ProposalSet,
    compose_multiclass,
    debias_tokens,
    dominant_class,
    pixel_argmax,
    select_masks,
)
from .evaluation import (
    ConfusionMatrix,
    ManifestError,
    ManifestRecord,
    accumulate,
    fg_iou,
    load_manifest,
    metrics_block,
    miou,
    per_class_iou,
    write_manifest,
)
from .pipeline import (
    ProviderBundle,
    default_provider_factory,
    ovss_predict,
    run_clickgen,
    run_eval,
    run_ovss,
    run_refer,
)
from .raster import (
    BinaryMask,
    DistanceField,
    LabelMap,
    ProbabilityMap,
    distance_transform,
    fraction_above,
    iou,
    mask_difference,
    mask_intersection,
    mask_union,
)
from .tiling import (
    aggregate_windows,
    embed_mask,
    grid_clicks,
    merge_tiles,
    plan_tiles,
    plan_windows,
    resize_nearest,
    scaled_dims,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "ClassPrompts",
    "Click",
    "ClickParseError",
    "ClickSet",
    "ClickTrace",
    "ConfigError",
    "ConfusionMatrix",
    "DistanceField",
    "LabelMap",
    "ManifestError",
    "ManifestRecord",
    "ProbabilityMap",
    "ProposalSet",
    "ProviderBundle",
    "RunConfig",
    "accumulate",
    "aggregate_windows",
    "compose_multiclass",
    "debias_tokens",
    "default_provider_factory",
    "distance_transform",
    "dominant_class",
    "embed_mask",
    "ensemble_vote",
    "fg_iou",
    "fraction_above",
    "generate_click_sequence",
    "grid_clicks",
    "iou",
    "load_config",
    "load_manifest",
    "mask_difference",
    "mask_intersection",
    "mask_union",
    "merge_tiles",
    "metrics_block",
    "miou",
    "ovss_predict",
    "parse_clicks_any",
    "parse_clicks_json",
    "parse_clicks_text",
    "per_class_iou",
    "pixel_argmax",
    "plan_tiles",
    "plan_windows",
    "resize_nearest",
    "run_clickgen",
    "run_eval",
    "run_ovss",
    "run_refer",
    "sample_click",
    "scaled_dims",
    "select_masks",
    "serialize_clicks_text",
    "write_manifest",
    "__version__",
]
