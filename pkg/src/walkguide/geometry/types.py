"""Core geometric value types shared across the pipeline.

Pixel convention: pixel centres sit on integer coordinates, so an image of
width ``W`` spans ``x`` in ``[0, W - 1]``. Normalized coordinates map onto
that range linearly (``x_px = x_norm * (W - 1)``), which keeps ``1.0``
inside the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..errors import GeometryError, ValidationError

DEFAULT_CAMERA_HEIGHT_M = 0.8
# Fallback focal length as a multiple of image width (~53 deg horizontal FOV).
DEFAULT_FOCAL_FACTOR = 1.0

Point = tuple[float, float]


def nearest_index(v: float, size: int) -> int:
    """Index of the pixel whose centre is closest to ``v``, clamped to the image."""
    i = math.floor(v + 0.5)
    return min(max(i, 0), size - 1)


def to_pixel(x_norm: float, y_norm: float, width: int, height: int) -> Point:
    return (x_norm * (width - 1), y_norm * (height - 1))


def to_normalized(x_px: float, y_px: float, width: int, height: int) -> Point:
    return (x_px / (width - 1), y_px / (height - 1))


@dataclass(frozen=True)
class CameraModel:
    fx_px: float
    fy_px: float
    cx_px: float
    cy_px: float
    height_m: float = DEFAULT_CAMERA_HEIGHT_M

    def __post_init__(self):
        if not (self.fx_px > 0 and self.fy_px > 0):
            raise ValidationError(f"focal lengths must be positive, got {self.fx_px}, {self.fy_px}",
                                  code="invalid-camera")
        if not self.height_m > 0:
            raise ValidationError(f"camera height must be positive, got {self.height_m}",
                                  code="invalid-camera")

    @classmethod
    def default_for(cls, width: int, height: int) -> "CameraModel":
        """Documented fallback intrinsics for scenes that ship without calibration."""
        f = DEFAULT_FOCAL_FACTOR * width
        return cls(fx_px=f, fy_px=f, cx_px=(width - 1) / 2, cy_px=(height - 1) / 2)

    def to_dict(self) -> dict:
        return {"fx_px": self.fx_px, "fy_px": self.fy_px, "cx_px": self.cx_px,
                "cy_px": self.cy_px, "height_m": self.height_m}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(
            fx_px=float(d["fx_px"]), fy_px=float(d["fy_px"]),
            cx_px=float(d["cx_px"]), cy_px=float(d["cy_px"]),
            height_m=float(d.get("height_m", DEFAULT_CAMERA_HEIGHT_M)),
        )


class DepthMap:
    """Metric depth aligned 1:1 with an image.

    Non-finite and non-positive entries are kept as-is but flagged through
    :attr:`valid`; nothing downstream reads them as real distances.
    """

    __slots__ = ("values", "valid")

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValidationError(f"depth must be a 2-D array of at least 2x2, got shape {arr.shape}",
                                  code="invalid-depth-map")
        with np.errstate(invalid="ignore"):
            valid = np.isfinite(arr) & (arr > 0)
        arr.setflags(write=False)
        valid.setflags(write=False)
        self.values = arr
        self.valid = valid

    @property
    def width_px(self) -> int:
        return self.values.shape[1]

    @property
    def height_px(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def at(self, x: float, y: float) -> float:
        """Nearest-pixel depth at continuous pixel coords; NaN where invalid."""
        r = nearest_index(y, self.height_px)
        c = nearest_index(x, self.width_px)
        return float(self.values[r, c]) if self.valid[r, c] else math.nan

    def has_valid(self) -> bool:
        return bool(self.valid.any())

    def scaled(self, factor: float) -> "DepthMap":
        return DepthMap(self.values * factor)

    def __repr__(self) -> str:
        return f"DepthMap({self.width_px}x{self.height_px}, valid={int(self.valid.sum())})"


@dataclass(frozen=True)
class GoalPoint:
    """Destination in normalized image coordinates.

    ``depth_m`` is unknown for human-assigned goals until a depth map is
    consulted, so it may be ``None``.
    """

    x_norm: float
    y_norm: float
    depth_m: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.x_norm <= 1.0 and 0.0 <= self.y_norm <= 1.0):
            raise ValidationError(f"goal ({self.x_norm}, {self.y_norm}) outside [0, 1]",
                                  code="goal-out-of-range")
        if self.depth_m is not None and not self.depth_m > 0:
            raise ValidationError(f"goal depth must be positive, got {self.depth_m}",
                                  code="invalid-depth")

    def to_pixel(self, width: int, height: int) -> Point:
        return to_pixel(self.x_norm, self.y_norm, width, height)

    def with_depth(self, depth_m: float) -> "GoalPoint":
        return GoalPoint(self.x_norm, self.y_norm, depth_m)


@dataclass(frozen=True)
class PathSample:
    x: float
    y: float
    depth_m: float

    @property
    def point(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class RegionPolygons:
    left: list[Point]
    right: list[Point]
    path: list[Point]

    def __iter__(self) -> Iterator[tuple[str, list[Point]]]:
        yield "left", self.left
        yield "right", self.right
        yield "path", self.path


REGION_KINDS = ("left", "right", "path")


@dataclass
class RegionMaskSet:
    """Binary masks for the three path regions; pairwise disjoint."""

    left: np.ndarray
    right: np.ndarray
    path: np.ndarray
    kinds: tuple[str, ...] = field(default=REGION_KINDS)

    def __post_init__(self):
        shapes = {self.left.shape, self.right.shape, self.path.shape}
        if len(shapes) != 1:
            raise GeometryError(f"mask shapes differ: {shapes}", code="mask-shape-mismatch")

    def get(self, kind: str) -> np.ndarray:
        if kind not in REGION_KINDS:
            raise KeyError(kind)
        return getattr(self, kind)

    @property
    def shape(self) -> tuple[int, int]:
        return self.path.shape

    def union(self) -> np.ndarray:
        return self.left | self.right | self.path

    def overlap_count(self) -> int:
        """Number of pixels claimed by more than one region (0 when well formed)."""
        stacked = self.left.astype(np.uint8) + self.right.astype(np.uint8) + self.path.astype(np.uint8)
        return int((stacked > 1).sum())


@dataclass
class PathGeometry:
    start: Point
    goal: GoalPoint
    polyline: list[PathSample]
    left_points: list[Point]
    right_points: list[Point]
    polygons: RegionPolygons
    cutoff_depth_m: float
    image_size: tuple[int, int]  # (width, height)
    masks: RegionMaskSet | None = None

    def path_array(self, ndigits: int = 4) -> list[tuple[float, float]]:
        """Polyline in normalized coordinates, bottom to top."""
        w, h = self.image_size
        return [
            (round(s.x / (w - 1), ndigits), round(s.y / (h - 1), ndigits))
            for s in self.polyline
        ]
