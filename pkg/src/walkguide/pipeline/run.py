"""Resumable batch runs over a manifest (generation) or a benchmark (prediction)."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import statistics
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..descriptions import DescriptionSet, Prediction
from ..errors import ValidationError, WalkGuideError
from ..geometry import GoalPoint, calibrate_depth, sample_goal_point
from ..geometry.io import save_mask_png
from ..scene import BenchRecord, SceneBundle
from .answers import emit_training_sample
from .config import PipelineConfig
from .describe import Completer, PromptRecorder, describe_scene, prepare_scene

log = logging.getLogger(__name__)

SAMPLES_DIR = "samples"
PARTIAL_DIR = "partial"
MASKS_DIR = "masks"
PROMPTS_DIR = "prompts"
DATASET_FILE = "dataset.jsonl"
SUMMARY_FILE = "summary.json"


def scene_seed(run_seed: int, scene_id: str) -> int:
    """Stable per-scene seed, independent of scene order and worker count."""
    digest = hashlib.sha256(f"{run_seed}:{scene_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def write_json(path: Path, obj, indent: int | None = 2) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + f".tmp{threading.get_ident()}")
    tmp.write_text(json.dumps(obj, indent=indent, ensure_ascii=False, sort_keys=True) + "\n",
                   encoding="utf-8")
    os.replace(tmp, path)


def safe_name(scene_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in scene_id)


class ScenesFailed(WalkGuideError):
    code = "scene-failed"


@dataclass
class RunSummary:
    total: int = 0
    ok: int = 0
    failed: int = 0
    resumed: int = 0
    failures: list[dict] = field(default_factory=list)
    latencies_s: list[float] = field(default_factory=list)
    backend_calls: int = 0
    cache_hits: int = 0
    dry_run: bool = False

    @property
    def mean_latency_s(self) -> float | None:
        return statistics.fmean(self.latencies_s) if self.latencies_s else None

    def to_dict(self) -> dict:
        return {"total": self.total, "ok": self.ok, "failed": self.failed, "resumed": self.resumed,
                "failures": sorted(self.failures, key=lambda f: f["scene_id"]),
                "mean_latency_s": self.mean_latency_s, "backend_calls": self.backend_calls,
                "cache_hits": self.cache_hits, "dry_run": self.dry_run}


class _Tally:
    def __init__(self, summary: RunSummary):
        self.summary = summary
        self._lock = threading.Lock()

    def ok(self, latency: float | None = None, resumed: bool = False):
        with self._lock:
            self.summary.ok += 1
            self.summary.resumed += resumed
            if latency is not None:
                self.summary.latencies_s.append(latency)

    def fail(self, scene_id: str, err: Exception):
        with self._lock:
            self.summary.failed += 1
            self.summary.failures.append({"scene_id": scene_id, "code": getattr(err, "code", "error"),
                                          "message": str(err)})


def _load_partial(path: Path) -> DescriptionSet | None:
    if not path.exists():
        return None
    try:
        return DescriptionSet.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError):
        log.warning("ignoring unreadable partial results %s", path)
        return None


def _gather(pool_fn, items: Sequence, workers: int, strict: bool, tally: _Tally, key):
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {pool.submit(pool_fn, it): it for it in items}
        for fut in as_completed(futures):
            item = futures[fut]
            try:
                fut.result()
            except WalkGuideError as e:
                log.warning("scene %s failed: %s", key(item), e)
                tally.fail(key(item), e)
                if strict:
                    for other in futures:
                        other.cancel()
                    raise ScenesFailed(f"scene {key(item)} failed in strict mode: {e}") from e


def run_generation(scenes: Iterable[SceneBundle], config: PipelineConfig, output_dir: str | Path,
                   gateway: Completer, *, seed: int = 0, workers: int = 1, strict: bool = False,
                   dry_run: bool = False, debug_masks: bool = False, limit: int | None = None) -> RunSummary:
    """Generate one training sample per scene under ``output_dir``.

    Scenes with a sample file already present are skipped, so a repeated run
    only queries what is missing. ``dataset.jsonl`` is rebuilt from all
    sample files in scene-id order at the end.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenes = list(scenes)[:limit] if limit is not None else list(scenes)
    ids = [s.scene_id for s in scenes]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate scene ids in the manifest", code="duplicate-scene")
    summary = RunSummary(total=len(scenes), dry_run=dry_run)
    tally = _Tally(summary)
    stats_before = _stats(gateway)

    def one(scene: SceneBundle):
        name = safe_name(scene.scene_id)
        sample_path = out / SAMPLES_DIR / f"{name}.json"
        if sample_path.exists() and not dry_run:
            tally.ok(resumed=True)
            return
        depth = scene.load_depth()
        if config.calibrate_depth:
            depth = calibrate_depth(depth, scene.camera, scene.detections)
        goal = sample_goal_point(depth, scene.camera, scene_seed(seed, scene.scene_id),
                                 target_dist_m=config.target_dist_m, max_angle_deg=config.max_angle_deg)
        ctx = prepare_scene(scene, goal, config, depth=depth)
        if debug_masks:
            for region in ("left", "right", "path"):
                save_mask_png(ctx.geometry.masks.get(region), out / MASKS_DIR / f"{name}_{region}.png")
        if dry_run:
            local = PromptRecorder()
            describe_scene(ctx, config, local)
            write_json(out / PROMPTS_DIR / f"{name}.json", [
                {"system": r.system_text, "user": r.prompt_text,
                 "image_sha256": [hashlib.sha256(t.image).hexdigest() if t.image else None
                                  for t in r.user_turns]} for r in local.requests])
            tally.ok()
            return
        partial_path = out / PARTIAL_DIR / f"{name}.json"
        ds = describe_scene(ctx, config, gateway, partial=_load_partial(partial_path),
                            on_slot=lambda d: write_json(partial_path, d.to_dict()))
        sample = emit_training_sample(scene.scene_id, str(scene.image_path.name), ctx.goal, ds,
                                      ctx.geometry.path_array(),
                                      provenance={"mode": config.mode, "region_style": config.region_style,
                                                  "detection_info": config.include_detection_info,
                                                  "model_id": config.model_id,
                                                  "seed": scene_seed(seed, scene.scene_id),
                                                  "goal_depth_m": round(ctx.goal.depth_m, 4)})
        write_json(sample_path, sample.to_record())
        partial_path.unlink(missing_ok=True)
        tally.ok(latency=ds.total_latency_s)

    try:
        _gather(one, scenes, workers, strict, tally, key=lambda s: s.scene_id)
    finally:
        stats_after = _stats(gateway)
        summary.backend_calls = stats_after[0] - stats_before[0]
        summary.cache_hits = stats_after[1] - stats_before[1]
        if not dry_run:
            write_dataset(out)
        write_json(out / SUMMARY_FILE, summary.to_dict())
    return summary


def _stats(gateway) -> tuple[int, int]:
    stats = getattr(gateway, "stats", None)
    return (stats.backend_calls, stats.cache_hits) if stats is not None else (0, 0)


def write_dataset(out: Path) -> Path:
    records = []
    for p in (out / SAMPLES_DIR).glob("*.json"):
        records.append(json.loads(p.read_text(encoding="utf-8")))
    records.sort(key=lambda r: r["id"])
    path = out / DATASET_FILE
    with path.open("w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")
    return path


def load_predictions(path: str | Path) -> list[Prediction]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            try:
                out.append(Prediction.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as e:
                raise ValidationError(f"{path}:{n}: malformed prediction ({e})",
                                      code="malformed-record") from None
    return out


def run_predictions(bench: Sequence[BenchRecord], scenes: Iterable[SceneBundle], config: PipelineConfig,
                    predictions_path: str | Path, gateway: Completer, *, workers: int = 1,
                    strict: bool = False, limit: int | None = None, backend_id: str = "") -> RunSummary:
    """Describe every benchmark scene at its annotated goal, appending to ``predictions_path``.

    Scenes already present in the file are skipped. The file is rewritten in
    benchmark order when the run ends.
    """
    path = Path(predictions_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    by_id = {s.scene_id: s for s in scenes}
    bench = list(bench)[:limit] if limit is not None else list(bench)
    missing = [r.scene_id for r in bench if r.scene_id not in by_id]
    if missing:
        raise ValidationError(f"benchmark scenes without a manifest entry: {missing[:5]}",
                              code="unmatched-scene")
    done = {p.scene_id: p for p in load_predictions(path)}
    summary = RunSummary(total=len(bench))
    tally = _Tally(summary)
    lock = threading.Lock()
    stats_before = _stats(gateway)
    partial_dir = path.parent / (path.stem + ".partial")

    def one(rec: BenchRecord):
        if rec.scene_id in done:
            tally.ok(resumed=True)
            return
        scene = by_id[rec.scene_id]
        ctx = prepare_scene(scene, GoalPoint(rec.goal.x_norm, rec.goal.y_norm), config)
        partial_path = partial_dir / f"{safe_name(rec.scene_id)}.json"
        ds = describe_scene(ctx, config, gateway, partial=_load_partial(partial_path),
                            on_slot=lambda d: write_json(partial_path, d.to_dict()))
        pred = Prediction(rec.scene_id, ds, backend_id=backend_id, mode=config.mode)
        with lock:
            done[rec.scene_id] = pred
            with path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(pred.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
        partial_path.unlink(missing_ok=True)
        tally.ok(latency=ds.total_latency_s)

    try:
        _gather(one, bench, workers, strict, tally, key=lambda r: r.scene_id)
    finally:
        order = {r.scene_id: i for i, r in enumerate(bench)}
        ordered = sorted(done.values(), key=lambda p: order.get(p.scene_id, len(order)))
        tmp = path.with_suffix(".tmp")
        tmp.write_text("".join(json.dumps(p.to_dict(), ensure_ascii=False, sort_keys=True) + "\n"
                               for p in ordered), encoding="utf-8")
        os.replace(tmp, path)
        if partial_dir.exists() and not any(partial_dir.iterdir()):
            partial_dir.rmdir()
    after = _stats(gateway)
    summary.backend_calls = after[0] - stats_before[0]
    summary.cache_hits = after[1] - stats_before[1]
    return summary
