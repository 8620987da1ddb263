"""Viewport-aware optical flow for 360-degree video.

Precomputes per-window optical flow over a sliding-window grid on the
sphere, estimates the flow perceived in any viewport in constant time,
and drives the opacity of body-fixed granulated rest-frame overlays.
"""

from panoflow.epof import EpofSample, HeadSample, epof, epof_trace, session_summary
from panoflow.flow import (
    FlowField,
    FlowMatrix,
    FlowParams,
    aggregate_window_flow,
    build_flow_matrix,
    estimate_flow,
    import_flow,
    percentile,
    write_flow,
)
from panoflow.grf import (
    GrainSet,
    GrfConfig,
    generate_grains,
    global_opacity,
    radial_envelope,
    render_mask,
)
from panoflow.grid import GridSpec, build_grid, overlap_fraction, overlapping_windows
from panoflow.projection import (
    EquirectFrame,
    PixelMap,
    ViewportSpec,
    angular_ratios,
    build_pixel_map,
    direction_to_equirect,
    project_direction,
    render_viewport,
    rotate_direction,
)

__version__ = "0.1.0"

__all__ = [
    "EpofSample",
    "EquirectFrame",
    "FlowField",
    "FlowMatrix",
    "FlowParams",
    "GrainSet",
    "GrfConfig",
    "GridSpec",
    "HeadSample",
    "PixelMap",
    "ViewportSpec",
    "aggregate_window_flow",
    "angular_ratios",
    "build_flow_matrix",
    "build_grid",
    "build_pixel_map",
    "direction_to_equirect",
    "epof",
    "epof_trace",
    "estimate_flow",
    "generate_grains",
    "global_opacity",
    "import_flow",
    "overlap_fraction",
    "overlapping_windows",
    "percentile",
    "project_direction",
    "radial_envelope",
    "render_mask",
    "render_viewport",
    "rotate_direction",
    "session_summary",
    "write_flow",
]
