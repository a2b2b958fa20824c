from __future__ import annotations

import math

from ..errors import GeometryError
from .path import (
    DEFAULT_HALF_WIDTH_M,
    DEFAULT_N_SAMPLES,
    START_NORM,
    build_path_polyline,
    build_region_polygons,
    fill_invalid_depths,
    lateral_offsets,
    start_pixel,
)
from .raster import DEFAULT_CUTOFF_MARGIN_M, cutoff_depth, rasterize_masks
from .types import CameraModel, DepthMap, GoalPoint, PathGeometry


def build_path_geometry(depth: DepthMap, camera: CameraModel, goal: GoalPoint,
                        n_samples: int = DEFAULT_N_SAMPLES,
                        half_width_m: float = DEFAULT_HALF_WIDTH_M,
                        margin_m: float = DEFAULT_CUTOFF_MARGIN_M) -> PathGeometry:
    """Full corridor geometry and region masks for one (scene, goal) pair.

    A goal without depth takes the depth map value under it. Invalid depths
    along the path borrow the nearest valid sample's depth.
    """
    w, h = depth.width_px, depth.height_px
    if goal.depth_m is None:
        d = depth.at(*goal.to_pixel(w, h))
        if not math.isfinite(d):
            raise GeometryError("goal lies on an invalid depth pixel", code="invalid-depth")
        goal = goal.with_depth(d)

    polyline = fill_invalid_depths(build_path_polyline(start_pixel(w, h), goal, depth, n_samples))
    lefts, rights = [], []
    for s in polyline:
        lp, rp = lateral_offsets(s.point, s.depth_m, camera, half_width_m, image_width=w)
        lefts.append(lp)
        rights.append(rp)
    polygons = build_region_polygons(polyline, lefts, rights, (w, h))
    cutoff = cutoff_depth(goal.depth_m, margin_m)
    masks = rasterize_masks(polygons, (w, h), depth, cutoff, polyline=[s.point for s in polyline])
    return PathGeometry(
        start=START_NORM,
        goal=goal,
        polyline=polyline,
        left_points=lefts,
        right_points=rights,
        polygons=polygons,
        cutoff_depth_m=cutoff,
        image_size=(w, h),
        masks=masks,
    )
