"""Depth map and mask file formats.

Depth: 32-bit float single-channel TIFF, ``.npy``, or raw row-major
little-endian float32 (``.raw``/``.bin``) with a JSON sidecar
``<file>.json`` holding ``{"width": W, "height": H}``.
Masks: 8-bit single-channel PNG, 0 or 255.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ValidationError
from .types import DepthMap

RAW_SUFFIXES = {".raw", ".bin"}


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_depth_dims(path: str | Path) -> tuple[int, int]:
    """(width, height) without decoding the full payload where the format allows."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in RAW_SUFFIXES:
        header = json.loads(sidecar_path(path).read_text())
        return int(header["width"]), int(header["height"])
    if suffix == ".npy":
        arr = np.load(path, mmap_mode="r")
        return arr.shape[1], arr.shape[0]
    with Image.open(path) as im:
        return im.size


def load_depth(path: str | Path) -> DepthMap:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in RAW_SUFFIXES:
        header = json.loads(sidecar_path(path).read_text())
        w, h = int(header["width"]), int(header["height"])
        dtype = np.dtype(header.get("dtype", "<f4"))
        data = np.fromfile(path, dtype=dtype)
        if data.size != w * h:
            raise ValidationError(f"{path}: {data.size} values, header says {w}x{h}",
                                  code="invalid-depth-map")
        return DepthMap(data.reshape(h, w))
    if suffix == ".npy":
        return DepthMap(np.load(path))
    with Image.open(path) as im:
        if im.mode not in ("F", "I", "I;16"):
            raise ValidationError(f"{path}: expected a single-channel float image, got mode {im.mode}",
                                  code="invalid-depth-map")
        return DepthMap(np.asarray(im, dtype=np.float32))


def save_depth(depth: DepthMap | np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    values = depth.values if isinstance(depth, DepthMap) else np.asarray(depth)
    values = values.astype("<f4")
    suffix = path.suffix.lower()
    if suffix in RAW_SUFFIXES:
        values.tofile(path)
        sidecar_path(path).write_text(json.dumps(
            {"width": values.shape[1], "height": values.shape[0], "dtype": "<f4"}))
    elif suffix == ".npy":
        np.save(path, values)
    else:
        Image.fromarray(values).save(path)
    return path


def save_mask_png(mask: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(path)
    return path


def load_mask_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 127
