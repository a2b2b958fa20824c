from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Mapping

from ..errors import ValidationError
from ..geometry.path import (
    DEFAULT_HALF_WIDTH_M,
    DEFAULT_MAX_ANGLE_DEG,
    DEFAULT_N_SAMPLES,
    DEFAULT_TARGET_DIST_M,
)
from ..geometry.raster import DEFAULT_CUTOFF_MARGIN_M

MODES = ("multi-turn", "single-turn")
REGION_STYLES = ("masked-image", "region-prompt")


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "multi-turn"
    region_style: str = "masked-image"
    include_detection_info: bool = True
    # geometry
    target_dist_m: float = DEFAULT_TARGET_DIST_M
    max_angle_deg: float = DEFAULT_MAX_ANGLE_DEG
    half_width_m: float = DEFAULT_HALF_WIDTH_M
    n_samples: int = DEFAULT_N_SAMPLES
    cutoff_margin_m: float = DEFAULT_CUTOFF_MARGIN_M
    calibrate_depth: bool = False
    # an object joins a region's clause when more than this fraction of its box lies in the mask
    min_overlap: float = 0.0
    # backend
    model_id: str = "llava-v1.6-34b"
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}", code="bad-config")
        if self.region_style not in REGION_STYLES:
            raise ValidationError(f"region_style must be one of {REGION_STYLES}", code="bad-config")
        if self.n_samples < 2:
            raise ValidationError("n_samples must be at least 2", code="bad-config")
        if not 0.0 <= self.min_overlap < 1.0:
            raise ValidationError("min_overlap must lie in [0, 1)", code="bad-config")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown pipeline settings: {sorted(unknown)}", code="bad-config")
        return cls(**dict(d))
