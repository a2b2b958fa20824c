"""Optional global depth-scale correction from objects of known physical size.

Off by default. The scale is the median, over detections with a known class
height, of ``physical_height / depth_implied_height``.
"""

from __future__ import annotations

import statistics
from typing import Iterable, Mapping

import numpy as np

from .raster import bbox_pixel_window
from .types import CameraModel, DepthMap

# Typical standing heights in meters.
DEFAULT_OBJECT_HEIGHTS_M: Mapping[str, float] = {
    "person": 1.7,
    "car": 1.5,
    "bus": 3.2,
    "truck": 3.0,
    "bicycle": 1.1,
    "motorcycle": 1.2,
    "wheelchair": 1.0,
    "stroller": 1.0,
    "bollard": 0.8,
    "fire hydrant": 0.7,
    "parking meter": 1.3,
    "bench": 0.8,
    "chair": 0.9,
    "potted plant": 0.9,
    "kiosk": 2.0,
}


def depth_scale_factor(depth: DepthMap, camera: CameraModel, detections: Iterable,
                       object_heights_m: Mapping[str, float] = DEFAULT_OBJECT_HEIGHTS_M) -> float:
    """Global multiplicative correction for ``depth``; 1.0 when nothing usable is detected."""
    w, h = depth.width_px, depth.height_px
    ratios = []
    for obj in detections:
        known = object_heights_m.get(obj.label)
        if known is None:
            continue
        c0, r0, c1, r1 = bbox_pixel_window(obj.bbox, w, h)
        window = depth.values[r0:r1 + 1, c0:c1 + 1][depth.valid[r0:r1 + 1, c0:c1 + 1]]
        if window.size == 0:
            continue
        z = float(np.median(window))
        implied = (r1 - r0 + 1) * z / camera.fy_px
        if implied > 0:
            ratios.append(known / implied)
    return statistics.median(ratios) if ratios else 1.0


def calibrate_depth(depth: DepthMap, camera: CameraModel, detections: Iterable,
                    object_heights_m: Mapping[str, float] = DEFAULT_OBJECT_HEIGHTS_M) -> DepthMap:
    factor = depth_scale_factor(depth, camera, detections, object_heights_m)
    return depth if factor == 1.0 else depth.scaled(factor)
