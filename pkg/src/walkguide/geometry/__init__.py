from .build import build_path_geometry
from .calibration import calibrate_depth, depth_scale_factor
from .path import (
    START_NORM,
    build_path_polyline,
    build_region_polygons,
    goal_along_direction,
    lateral_offset_px,
    lateral_offsets,
    sample_goal_point,
    start_pixel,
)
from .raster import (
    apply_background_cutoff,
    cutoff_depth,
    mask_image,
    rasterize_masks,
    rasterize_polygon,
    region_overlap,
)
from .types import (
    CameraModel,
    DepthMap,
    GoalPoint,
    PathGeometry,
    PathSample,
    RegionMaskSet,
    RegionPolygons,
    to_normalized,
    to_pixel,
)

__all__ = [
    "CameraModel", "DepthMap", "GoalPoint", "PathGeometry", "PathSample", "RegionMaskSet",
    "RegionPolygons", "START_NORM", "apply_background_cutoff", "build_path_geometry",
    "build_path_polyline", "build_region_polygons", "calibrate_depth", "cutoff_depth",
    "depth_scale_factor", "goal_along_direction", "lateral_offset_px", "lateral_offsets",
    "mask_image", "rasterize_masks", "rasterize_polygon", "region_overlap", "sample_goal_point",
    "start_pixel", "to_normalized", "to_pixel",
]
