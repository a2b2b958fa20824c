"""Synthetic on-disk scene fixtures."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from walkguide.geometry.io import save_depth

W, H = 64, 48
CAMERA = {"fx_px": 60.0, "fy_px": 60.0, "cx_px": 31.5, "cy_px": 23.5, "height_m": 0.8}


def ground_depth(w=W, h=H, near=1.0, far=25.0):
    """Depth growing from ``near`` at the bottom row to ``far`` at the top row."""
    rows = np.linspace(far, near, h)
    return np.repeat(rows[:, None], w, axis=1).astype(np.float32)


def write_scene(root: Path, scene_id: str, depth=None, detections=None, w=W, h=H,
                seed=0, depth_name=None, camera=CAMERA) -> dict:
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    Image.fromarray(img).save(root / f"{scene_id}.png")
    depth = ground_depth(w, h) if depth is None else depth
    depth_file = depth_name or f"{scene_id}.depth.npy"
    save_depth(np.asarray(depth, dtype=np.float32), root / depth_file)
    rec = {"scene_id": scene_id, "image": f"{scene_id}.png", "depth": depth_file, "camera": camera}
    if detections is not None:
        det_file = f"{scene_id}.det.json"
        (root / det_file).write_text(json.dumps(detections))
        rec["detections"] = det_file
    return rec


def write_manifest(root: Path, records, name="manifest.jsonl") -> Path:
    p = root / name
    p.write_text("".join(json.dumps(r) + "\n" for r in records))
    return p


def bench_row(scene_id, passable="go", goal=(0.5, 0.5)):
    reco = ("Follow the path. The path is clear of obstacles." if passable == "go"
            else "Stop and wait. A car is on the path.")
    return {
        "scene_id": scene_id, "goal": list(goal), "path_array": [[0.5, 1.0], list(goal)],
        "dest": "The destination is ahead on the sidewalk.",
        "left": "There are cars on the left side.",
        "right": "There are people on the right side.",
        "path": "There are nothing on the path.",
        "reco": reco, "passable": passable,
    }
