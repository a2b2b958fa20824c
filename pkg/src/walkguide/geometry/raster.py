"""Polygon rasterization, depth cutoff, image masking and bbox/region overlap."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from ..errors import GeometryError
from .types import DepthMap, Point, RegionMaskSet, RegionPolygons, nearest_index

_EPS = 1e-9
DEFAULT_CUTOFF_MARGIN_M = 3.0


def rasterize_polygon(vertices: Sequence[Point], width: int, height: int) -> np.ndarray:
    """Closed even-odd fill of a polygon over integer pixel centres.

    Pixels lying exactly on an edge are included. Works row by row: edge
    crossings use the half-open rule, then boundary pixels are added back.
    """
    mask = np.zeros((height, width), dtype=bool)
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) == 0:
        return mask
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    rows = np.arange(height, dtype=np.float64)[:, None]
    dy = y2 - y1
    horizontal = np.abs(dy) < _EPS
    safe_dy = np.where(horizontal, 1.0, dy)
    xs = x1 + (rows - y1) * (x2 - x1) / safe_dy

    crosses = (((y1 <= rows) & (rows < y2)) | ((y2 <= rows) & (rows < y1))) & ~horizontal
    for r in range(height):
        xr = np.sort(xs[r, crosses[r]])
        for a, b in zip(xr[0::2], xr[1::2]):
            c0 = max(math.ceil(a - _EPS), 0)
            c1 = min(math.floor(b + _EPS), width - 1)
            if c0 <= c1:
                mask[r, c0:c1 + 1] = True

    # boundary pixels on sloped edges
    lo, hi = np.minimum(y1, y2), np.maximum(y1, y2)
    in_span = (rows >= lo - _EPS) & (rows <= hi + _EPS) & ~horizontal
    near = np.abs(xs - np.round(xs)) < 1e-7
    rr, ee = np.nonzero(in_span & near)
    cols = np.round(xs[rr, ee]).astype(int)
    ok = (cols >= 0) & (cols < width)
    mask[rr[ok], cols[ok]] = True

    # horizontal edges lying on a pixel row
    for e in np.nonzero(horizontal)[0]:
        yr = y1[e]
        r = round(yr)
        if abs(yr - r) > 1e-7 or not 0 <= r < height:
            continue
        c0 = max(math.ceil(min(x1[e], x2[e]) - _EPS), 0)
        c1 = min(math.floor(max(x1[e], x2[e]) + _EPS), width - 1)
        if c0 <= c1:
            mask[r, c0:c1 + 1] = True

    # isolated vertices
    for x, y in v:
        c, r = round(x), round(y)
        if abs(x - c) < 1e-7 and abs(y - r) < 1e-7 and 0 <= c < width and 0 <= r < height:
            mask[r, c] = True
    return mask


def cutoff_depth(goal_depth_m: float, margin_m: float = DEFAULT_CUTOFF_MARGIN_M) -> float:
    if not goal_depth_m > 0:
        raise GeometryError(f"goal depth must be positive, got {goal_depth_m}", code="invalid-depth")
    if margin_m < 0:
        raise GeometryError(f"margin must be non-negative, got {margin_m}", code="invalid-params")
    return goal_depth_m + margin_m


def depth_keep_mask(depth: DepthMap, cutoff_m: float) -> np.ndarray:
    """Pixels whose depth is valid and within the cutoff. Invalid pixels count as beyond it."""
    with np.errstate(invalid="ignore"):
        return depth.valid & (depth.values <= cutoff_m)


def apply_background_cutoff(masks: RegionMaskSet, depth: DepthMap, goal_depth_m: float,
                            margin_m: float = DEFAULT_CUTOFF_MARGIN_M) -> RegionMaskSet:
    """Clear every region pixel lying further than ``goal_depth_m + margin_m``."""
    if depth.shape != masks.shape:
        raise GeometryError(f"depth {depth.shape} and masks {masks.shape} differ",
                            code="dimension-mismatch")
    keep = depth_keep_mask(depth, cutoff_depth(goal_depth_m, margin_m))
    return RegionMaskSet(left=masks.left & keep, right=masks.right & keep, path=masks.path & keep)


def rasterize_masks(polygons: RegionPolygons, image_dims: tuple[int, int],
                    depth: DepthMap | None = None, cutoff_m: float | None = None,
                    polyline: Iterable[Point] | None = None) -> RegionMaskSet:
    """Rasterize the three region polygons into disjoint masks.

    Pixels shared between the path and a side region go to the path. When
    ``polyline`` is given its sample pixels are always part of the path, even
    where the corridor is narrower than a pixel. With ``depth`` and ``cutoff_m``
    the background cutoff is applied last.
    """
    w, h = image_dims
    path = rasterize_polygon(polygons.path, w, h)
    if polyline is not None:
        for x, y in polyline:
            path[nearest_index(y, h), nearest_index(x, w)] = True
    left = rasterize_polygon(polygons.left, w, h) & ~path
    right = rasterize_polygon(polygons.right, w, h) & ~path & ~left
    masks = RegionMaskSet(left=left, right=right, path=path)
    if depth is not None and cutoff_m is not None:
        if depth.shape != (h, w):
            raise GeometryError(f"depth {depth.shape} does not match image {(h, w)}",
                                code="dimension-mismatch")
        keep = depth_keep_mask(depth, cutoff_m)
        masks = RegionMaskSet(left=left & keep, right=right & keep, path=path & keep)
    return masks


def mask_image(image: np.ndarray, mask: np.ndarray, fill=(0, 0, 0)) -> np.ndarray:
    """Keep pixels where ``mask`` is set, replace the rest with ``fill``."""
    image = np.asarray(image)
    mask = np.asarray(mask).astype(bool)
    if image.shape[:2] != mask.shape:
        raise GeometryError(f"image {image.shape[:2]} and mask {mask.shape} differ",
                            code="dimension-mismatch")
    if image.ndim == 2:
        fill_value = np.asarray(fill if np.isscalar(fill) else fill[0], dtype=image.dtype)
        return np.where(mask, image, fill_value)
    fill_value = np.broadcast_to(np.asarray(fill, dtype=image.dtype), (image.shape[2],))
    return np.where(mask[..., None], image, fill_value)


def bbox_pixel_window(bbox: Sequence[float], width: int, height: int) -> tuple[int, int, int, int]:
    """Inclusive (c0, r0, c1, r1) pixel window whose centres fall inside a normalized bbox."""
    x1, y1, x2, y2 = (float(b) for b in bbox)
    if not (x1 < x2 and y1 < y2):
        raise GeometryError(f"bbox {list(bbox)} has zero area", code="degenerate-bbox")

    def span(a: float, b: float, size: int) -> tuple[int, int]:
        a, b = min(max(a, 0.0), 1.0) * (size - 1), min(max(b, 0.0), 1.0) * (size - 1)
        lo, hi = math.ceil(a - _EPS), math.floor(b + _EPS)
        if lo > hi:  # thinner than a pixel: use the pixel nearest the centre
            lo = hi = nearest_index((a + b) / 2, size)
        return lo, hi

    c0, c1 = span(x1, x2, width)
    r0, r1 = span(y1, y2, height)
    return c0, r0, c1, r1


def region_overlap(bbox: Sequence[float], mask: np.ndarray) -> float:
    """Fraction of the bbox's pixels that are set in ``mask``."""
    h, w = mask.shape
    c0, r0, c1, r1 = bbox_pixel_window(bbox, w, h)
    window = mask[r0:r1 + 1, c0:c1 + 1]
    return float(np.count_nonzero(window)) / window.size
