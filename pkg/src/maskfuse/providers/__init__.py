"""Model providers: ground-truth oracles, HTTP clients, and the reference server."""

from .base import (
    BACKENDS,
    CAPABILITIES,
    CLICK_SUGGEST,
    MASK_PROPOSALS,
    PROBABILITY_MAP,
    SEGMENT,
    ProviderError,
    ProviderHandle,
    ProviderSchemaError,
    ProviderStatusError,
    ProviderTransportError,
)
from .http import HttpClickSuggester, HttpMaskProposals, HttpProbabilityMaps, HttpSegmenter
from .mockserver import MockProviderServer
from .oracle import GroundTruthOracle, connected_components, most_interior_pixel, oracle_segment
from .scene import Scene, SceneSpec, ShapeSpec, class_color, make_scene, random_scene_spec

__all__ = [
    "BACKENDS",
    "CAPABILITIES",
    "CLICK_SUGGEST",
    "MASK_PROPOSALS",
    "PROBABILITY_MAP",
    "SEGMENT",
    "ProviderError",
    "ProviderHandle",
    "ProviderSchemaError",
    "ProviderStatusError",
    "ProviderTransportError",
    "HttpClickSuggester",
    "HttpMaskProposals",
    "HttpProbabilityMaps",
    "HttpSegmenter",
    "MockProviderServer",
    "GroundTruthOracle",
    "connected_components",
    "most_interior_pixel",
    "oracle_segment",
    "Scene",
    "SceneSpec",
    "ShapeSpec",
    "class_color",
    "make_scene",
    "random_scene_spec",
]
