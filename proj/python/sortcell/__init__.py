"""Textile sorting cell simulator and VLM classifier benchmark."""

from ._core import (
    __version__,
    build_prompt,
    canonical_classes,
    evaluate,
    parse_response,
    percentile,
    render_camera,
    run_cell,
    segment,
    spawn_scene,
    timing_stats,
)

__all__ = [
    "__version__",
    "build_prompt",
    "canonical_classes",
    "evaluate",
    "parse_response",
    "percentile",
    "render_camera",
    "run_cell",
    "segment",
    "spawn_scene",
    "timing_stats",
]
