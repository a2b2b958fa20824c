"""Goal sampling, straight-line path construction and depth-scaled path width."""

from __future__ import annotations

import math

import numpy as np

from ..errors import GeometryError
from .types import (
    CameraModel,
    DepthMap,
    GoalPoint,
    PathSample,
    Point,
    RegionPolygons,
    nearest_index,
    to_normalized,
)

START_NORM: Point = (0.5, 1.0)
DEFAULT_TARGET_DIST_M = 10.0
DEFAULT_MAX_ANGLE_DEG = 45.0
DEFAULT_HALF_WIDTH_M = 1.0
DEFAULT_N_SAMPLES = 20


def start_pixel(width: int, height: int) -> Point:
    return (START_NORM[0] * (width - 1), START_NORM[1] * (height - 1))


def _flat_ground_goal(camera: CameraModel, angle_rad: float, dist_m: float,
                      width: int, height: int) -> Point:
    # Ground point dist_m ahead along the bearing, camera looking level.
    forward = dist_m * math.cos(angle_rad)
    lateral = dist_m * math.sin(angle_rad)
    u = camera.cx_px + camera.fx_px * lateral / forward
    v = camera.cy_px + camera.fy_px * camera.height_m / forward
    return (min(max(u, 0.0), width - 1.0), min(max(v, 0.0), height - 1.0))


def goal_along_direction(depth: DepthMap, camera: CameraModel, angle_deg: float,
                         target_dist_m: float = DEFAULT_TARGET_DIST_M) -> GoalPoint:
    """March from the bottom-centre start along a bearing until depth reaches the target.

    ``angle_deg`` is measured from the image vertical, positive to the right.
    The ray advances one pixel per step and the goal keeps the continuous ray
    position, so a 0 deg ray stays exactly on the centre line. When no pixel on
    the ray reaches ``target_dist_m`` the goal falls back to the flat-ground
    pinhole projection of a point ``target_dist_m`` ahead.
    """
    if not depth.has_valid():
        raise GeometryError("depth map has no valid pixels", code="no-valid-depth")
    if not target_dist_m > 0:
        raise GeometryError(f"target distance must be positive, got {target_dist_m}",
                            code="invalid-params")
    w, h = depth.width_px, depth.height_px
    sx, sy = start_pixel(w, h)
    theta = math.radians(angle_deg)
    dx, dy = math.sin(theta), -math.cos(theta)
    values, valid = depth.values, depth.valid

    t = 0
    while True:
        x, y = sx + t * dx, sy + t * dy
        c, r = math.floor(x + 0.5), math.floor(y + 0.5)
        if not (0 <= c < w and 0 <= r < h):
            break
        if valid[r, c] and values[r, c] >= target_dist_m:
            xn, yn = to_normalized(x, y, w, h)
            return GoalPoint(min(max(xn, 0.0), 1.0), min(max(yn, 0.0), 1.0), float(values[r, c]))
        t += 1

    u, v = _flat_ground_goal(camera, theta, target_dist_m, w, h)
    xn, yn = to_normalized(u, v, w, h)
    return GoalPoint(xn, yn, target_dist_m)


def sample_goal_point(depth: DepthMap, camera: CameraModel, rng_seed: int,
                      target_dist_m: float = DEFAULT_TARGET_DIST_M,
                      max_angle_deg: float = DEFAULT_MAX_ANGLE_DEG) -> GoalPoint:
    """Draw a bearing uniformly in ``[-max_angle_deg, +max_angle_deg]`` and place the goal on it.

    Pure in its arguments: the same seed always yields the same goal.
    """
    if not max_angle_deg > 0:
        raise GeometryError(f"max angle must be positive, got {max_angle_deg}", code="invalid-params")
    if not depth.has_valid():
        raise GeometryError("depth map has no valid pixels", code="no-valid-depth")
    rng = np.random.default_rng(rng_seed)
    angle = float(rng.uniform(-max_angle_deg, max_angle_deg))
    return goal_along_direction(depth, camera, angle, target_dist_m)


def build_path_polyline(start: Point, goal: GoalPoint | Point, depth: DepthMap,
                        n_samples: int = DEFAULT_N_SAMPLES) -> list[PathSample]:
    """Linearly interpolate ``n_samples`` points from ``start`` to ``goal`` (pixel space).

    Each sample carries the nearest-pixel depth, NaN where the map is invalid.
    """
    if n_samples < 2:
        raise GeometryError(f"need at least 2 samples, got {n_samples}", code="degenerate-path")
    if isinstance(goal, GoalPoint):
        gx, gy = goal.to_pixel(depth.width_px, depth.height_px)
    else:
        gx, gy = goal
    sx, sy = start
    if gy < 0 or not sy > gy:
        raise GeometryError(f"goal ({gx}, {gy}) must lie above start ({sx}, {sy}) inside the image",
                            code="degenerate-path")
    out = []
    for i in range(n_samples):
        f = i / (n_samples - 1)
        x = sx + f * (gx - sx)
        y = sy + f * (gy - sy)
        out.append(PathSample(x, y, depth.at(x, y)))
    # endpoints exact, no accumulated float error
    out[0] = PathSample(sx, sy, out[0].depth_m)
    out[-1] = PathSample(gx, gy, out[-1].depth_m)
    return out


def lateral_offset_px(z_m: float, fx_px: float, half_width_m: float = DEFAULT_HALF_WIDTH_M) -> float:
    """Unclamped horizontal pixel offset of a point ``half_width_m`` to the side at depth ``z_m``."""
    if not z_m > 0 or not math.isfinite(z_m):
        raise GeometryError(f"depth must be positive and finite, got {z_m}", code="invalid-depth")
    return half_width_m / z_m * fx_px


def lateral_offsets(point: Point, z_m: float, camera: CameraModel,
                    half_width_m: float = DEFAULT_HALF_WIDTH_M,
                    image_width: int | None = None) -> tuple[Point, Point]:
    """Left and right path edge points at the same image row as ``point``.

    ``half_width_m=1.0`` gives a 2 m corridor; ``2.0`` reproduces the literal
    ``2 / z * fx`` per-side term. Results are clamped to ``[0, image_width - 1]``
    when the width is known.
    """
    off = lateral_offset_px(z_m, camera.fx_px, half_width_m)
    x, y = point
    lx, rx = x - off, x + off
    if image_width is not None:
        hi = image_width - 1.0
        lx = min(max(lx, 0.0), hi)
        rx = min(max(rx, 0.0), hi)
    return (lx, y), (rx, y)


def fill_invalid_depths(samples: list[PathSample]) -> list[PathSample]:
    """Replace NaN sample depths with the nearest valid sample depth along the path."""
    depths = [s.depth_m for s in samples]
    good = [i for i, d in enumerate(depths) if math.isfinite(d) and d > 0]
    if not good:
        raise GeometryError("no valid depth along the path", code="invalid-depth")
    if len(good) == len(samples):
        return samples
    out = []
    for i, s in enumerate(samples):
        if i in good:
            out.append(s)
        else:
            j = min(good, key=lambda g: (abs(g - i), g))
            out.append(PathSample(s.x, s.y, depths[j]))
    return out


def build_region_polygons(polyline: list[PathSample] | list[Point], left_points: list[Point],
                          right_points: list[Point], image_dims: tuple[int, int]) -> RegionPolygons:
    """Left, right and path polygons in pixel space.

    Left: top-left corner, bottom-left corner, then the left edge bottom to top.
    Right: mirrored with the right-hand corners. Path: the left edge bottom to
    top followed by the right edge top to bottom.
    """
    if len(polyline) < 2 or len(left_points) != len(polyline) or len(right_points) != len(polyline):
        raise GeometryError("need at least 2 aligned path samples", code="degenerate-path")
    w, h = image_dims

    def clamp(p: Point) -> Point:
        return (min(max(p[0], 0.0), w - 1.0), min(max(p[1], 0.0), h - 1.0))

    lefts = [clamp(p) for p in left_points]
    rights = [clamp(p) for p in right_points]
    top_left, bottom_left = (0.0, 0.0), (0.0, h - 1.0)
    top_right, bottom_right = (w - 1.0, 0.0), (w - 1.0, h - 1.0)
    return RegionPolygons(
        left=[top_left, bottom_left, *lefts],
        right=[top_right, bottom_right, *rights],
        path=[*lefts, *reversed(rights)],
    )
