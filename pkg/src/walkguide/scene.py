"""Scenes, detections, benchmark records and generated samples, plus their file formats.

All coordinates crossing this module's boundary are normalized to ``[0, 1]``
with a top-left origin. Manifest, benchmark and dataset files are JSON Lines.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .errors import ValidationError
from .geometry import CameraModel, DepthMap, GoalPoint, region_overlap
from .geometry.io import load_depth, read_depth_dims
from .labels import GO, OTHER_PREFIX, STOP, VOCABULARY, normalize_label, parse_reco_label

log = logging.getLogger(__name__)

BENCH_TEXT_FIELDS = ("dest_text", "left_text", "right_text", "path_text", "reco_text")


@dataclass(frozen=True)
class DetectedObject:
    label: str
    bbox: tuple[float, float, float, float]
    score: float = 1.0

    def __post_init__(self):
        x1, y1, x2, y2 = self.bbox
        if not (0.0 <= x1 < x2 <= 1.0 and 0.0 <= y1 < y2 <= 1.0):
            raise ValidationError(f"bbox {self.bbox} is not a normalized box", code="invalid-bbox")
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score {self.score} outside [0, 1]", code="invalid-score")
        if self.label not in VOCABULARY and not self.label.startswith(OTHER_PREFIX):
            raise ValidationError(f"label {self.label!r} not in vocabulary", code="invalid-label")

    @classmethod
    def from_dict(cls, d: Mapping) -> "DetectedObject":
        return cls(label=normalize_label(str(d["label"])),
                   bbox=tuple(float(v) for v in d["bbox"]),
                   score=float(d.get("score", 1.0)))

    def to_dict(self) -> dict:
        return {"label": self.label, "bbox": list(self.bbox), "score": self.score}


def parse_detections(payload) -> list[DetectedObject]:
    """Objects from a JSON list or a ``{"objects": [...]}`` mapping, input order kept."""
    if isinstance(payload, Mapping):
        payload = payload.get("objects", [])
    return [DetectedObject.from_dict(d) for d in payload]


def load_detections(path: str | Path) -> list[DetectedObject]:
    text = Path(path).read_text().strip()
    return parse_detections(json.loads(text)) if text else []


def filter_objects_by_region(objects: Iterable[DetectedObject], mask: np.ndarray,
                             min_overlap: float = 0.0) -> list[DetectedObject]:
    """Objects whose bbox overlaps ``mask`` by more than ``min_overlap``, in input order."""
    return [o for o in objects if region_overlap(o.bbox, mask) > min_overlap]


@dataclass(frozen=True)
class SceneBundle:
    scene_id: str
    image_path: Path
    depth_path: Path | None
    camera: CameraModel
    detections: tuple[DetectedObject, ...] = ()
    image_size: tuple[int, int] = (0, 0)  # (width, height)

    def load_image(self) -> np.ndarray:
        with Image.open(self.image_path) as im:
            return np.asarray(im.convert("RGB"))

    def load_depth(self) -> DepthMap:
        if self.depth_path is None:
            raise ValidationError(f"scene {self.scene_id} has no depth file", code="no-depth-provider")
        return load_depth(self.depth_path)

    def to_record(self, base_dir: Path | None = None) -> dict:
        def rel(p: Path | None):
            if p is None:
                return None
            if base_dir is not None:
                try:
                    return str(p.relative_to(base_dir))
                except ValueError:
                    pass
            return str(p)

        return {
            "scene_id": self.scene_id,
            "image": rel(self.image_path),
            "depth": rel(self.depth_path),
            "camera": self.camera.to_dict(),
            "detections": [o.to_dict() for o in self.detections],
        }


@dataclass
class ManifestIssue:
    line: int
    scene_id: str | None
    message: str


def _resolve(base: Path, value) -> Path | None:
    if value in (None, ""):
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _bundle_from_record(rec: Mapping, base: Path) -> SceneBundle:
    scene_id = str(rec.get("scene_id") or "")
    if not scene_id:
        raise ValidationError("record has no scene_id", code="malformed-record")
    image_path = _resolve(base, rec.get("image"))
    if image_path is None or not image_path.exists():
        raise ValidationError(f"scene {scene_id}: image file {image_path} not found", code="missing-file")
    with Image.open(image_path) as im:
        size = im.size
    depth_path = _resolve(base, rec.get("depth"))
    if depth_path is not None:
        if not depth_path.exists():
            raise ValidationError(f"scene {scene_id}: depth file {depth_path} not found", code="missing-file")
        dims = read_depth_dims(depth_path)
        if dims != size:
            raise ValidationError(
                f"scene {scene_id}: depth dims {dims[0]}x{dims[1]} differ from image {size[0]}x{size[1]}",
                code="dimension-mismatch")
    cam = rec.get("camera")
    camera = CameraModel.from_dict(cam) if cam else CameraModel.default_for(*size)
    dets = rec.get("detections")
    if isinstance(dets, str):
        det_path = _resolve(base, dets)
        if not det_path.exists():
            raise ValidationError(f"scene {scene_id}: detections file {det_path} not found",
                                  code="missing-file")
        objects = load_detections(det_path)
    else:
        objects = parse_detections(dets or [])
    return SceneBundle(scene_id, image_path, depth_path, camera, tuple(objects), size)


def load_manifest(path: str | Path, strict: bool = False,
                  issues: list[ManifestIssue] | None = None) -> list[SceneBundle]:
    """Validated scene bundles from a JSON Lines manifest.

    Invalid records are logged with their line number and skipped; with
    ``strict`` the first one raises. Pass ``issues`` to collect them.
    Relative file references resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise ValidationError(f"cannot read manifest {path}: {e}", code="unreadable-manifest") from e
    base = path.parent
    bundles: list[SceneBundle] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        scene_id = None
        try:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValidationError(f"malformed JSON: {e}", code="malformed-record") from e
            scene_id = rec.get("scene_id") if isinstance(rec, dict) else None
            if not isinstance(rec, dict):
                raise ValidationError("record is not an object", code="malformed-record")
            bundle = _bundle_from_record(rec, base)
            if bundle.scene_id in seen:
                raise ValidationError(f"duplicate scene_id {bundle.scene_id}", code="duplicate-scene")
        except ValidationError as e:
            if strict:
                raise ValidationError(f"{path}:{lineno}: {e}", code=e.code) from e
            log.warning("%s:%d: skipping record: %s", path, lineno, e)
            if issues is not None:
                issues.append(ManifestIssue(lineno, scene_id, str(e)))
            continue
        seen.add(bundle.scene_id)
        bundles.append(bundle)
    return bundles


def write_manifest(bundles: Iterable[SceneBundle], path: str | Path) -> Path:
    path = Path(path)
    base = path.parent.resolve()
    with path.open("w") as f:
        for b in bundles:
            f.write(json.dumps(b.to_record(base)) + "\n")
    return path


@dataclass(frozen=True)
class BenchRecord:
    scene_id: str
    goal: GoalPoint
    path_array: tuple[tuple[float, float], ...]
    dest_text: str
    left_text: str
    right_text: str
    path_text: str
    reco_text: str
    passable: str

    def texts(self) -> dict[str, str]:
        return {"dest": self.dest_text, "left": self.left_text, "right": self.right_text,
                "path": self.path_text, "reco": self.reco_text}

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "goal": [self.goal.x_norm, self.goal.y_norm],
            "path_array": [list(p) for p in self.path_array],
            "dest": self.dest_text,
            "left": self.left_text,
            "right": self.right_text,
            "path": self.path_text,
            "reco": self.reco_text,
            "passable": self.passable,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BenchRecord":
        violations = validate_bench_record(d)
        if violations:
            raise ValidationError(f"bench record {d.get('scene_id')}: {', '.join(violations)}",
                                  code="invalid-bench-record")
        gx, gy = d["goal"]
        return cls(
            scene_id=str(d["scene_id"]),
            goal=GoalPoint(float(gx), float(gy)),
            path_array=tuple((float(x), float(y)) for x, y in d.get("path_array", [])),
            dest_text=d["dest"], left_text=d["left"], right_text=d["right"],
            path_text=d["path"], reco_text=d["reco"], passable=d["passable"],
        )


def validate_bench_record(record: BenchRecord | Mapping) -> list[str]:
    """Violated invariants of a benchmark row; an empty list means the row is valid."""
    if isinstance(record, BenchRecord):
        record = record.to_dict()
    out = []
    if not str(record.get("scene_id") or ""):
        out.append("missing-scene-id")
    goal = record.get("goal")
    try:
        gx, gy = (float(v) for v in goal)
        if not (0.0 <= gx <= 1.0 and 0.0 <= gy <= 1.0):
            out.append("goal-out-of-range")
    except (TypeError, ValueError):
        out.append("malformed-goal")
    for p in record.get("path_array") or []:
        try:
            px, py = (float(v) for v in p)
        except (TypeError, ValueError):
            out.append("malformed-path-array")
            break
        if not (0.0 <= px <= 1.0 and 0.0 <= py <= 1.0):
            out.append("path-array-out-of-range")
            break
    for key in ("dest", "left", "right", "path", "reco"):
        if not str(record.get(key) or "").strip():
            out.append(f"empty-{key}")
    passable = record.get("passable")
    if passable not in (GO, STOP):
        out.append("invalid-passable")
    elif str(record.get("reco") or "").strip() and parse_reco_label(record["reco"]) != passable:
        out.append("reco-label-mismatch")
    return out


def load_bench(path: str | Path) -> list[BenchRecord]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"benchmark file {path} not found", code="missing-file")
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(BenchRecord.from_dict(json.loads(line)))
        except (ValidationError, json.JSONDecodeError, KeyError) as e:
            raise ValidationError(f"{path}:{lineno}: {e}", code="invalid-bench-record") from e
    return out


def write_bench(records: Iterable[BenchRecord], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w") as f:
        for r in records:
            f.write(json.dumps(r.to_dict()) + "\n")
    return path


@dataclass
class GeneratedSample:
    scene_id: str
    image: str
    goal: GoalPoint
    query_text: str
    answer_xml: str
    descriptions: dict[str, str]
    path_array: Sequence[tuple[float, float]]
    provenance: dict = field(default_factory=dict)

    # keys that vary run to run and stay out of dataset files
    VOLATILE_KEYS = ("started_at", "finished_at", "latencies_s")

    def to_record(self, include_volatile: bool = False) -> dict:
        prov = {k: v for k, v in self.provenance.items()
                if include_volatile or k not in self.VOLATILE_KEYS}
        return {
            "id": self.scene_id,
            "image": self.image,
            "goal": [self.goal.x_norm, self.goal.y_norm],
            "conversations": [
                {"from": "human", "value": self.query_text},
                {"from": "gpt", "value": self.answer_xml},
            ],
            "descriptions": dict(self.descriptions),
            "path_array": [list(p) for p in self.path_array],
            "provenance": prov,
        }

    @classmethod
    def from_record(cls, d: Mapping) -> "GeneratedSample":
        convo = {c["from"]: c["value"] for c in d["conversations"]}
        gx, gy = d["goal"]
        return cls(
            scene_id=d["id"], image=d["image"], goal=GoalPoint(gx, gy),
            query_text=convo["human"], answer_xml=convo["gpt"],
            descriptions=dict(d.get("descriptions", {})),
            path_array=[tuple(p) for p in d.get("path_array", [])],
            provenance=dict(d.get("provenance", {})),
        )
