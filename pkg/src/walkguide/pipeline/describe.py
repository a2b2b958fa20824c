"""Per-scene querying: six region-aware calls, or one numbered call."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from PIL import Image

from ..descriptions import SLOTS, DescriptionSet
from ..errors import GeometryError
from ..gateway import ChatRequest, ChatResponse
from ..geometry import DepthMap, GoalPoint, PathGeometry, build_path_geometry, calibrate_depth, mask_image
from ..prompts import (
    START_POINT,
    PromptBundle,
    build_region_bundle,
    render_single_turn_prompt,
)
from ..scene import DetectedObject, SceneBundle, filter_objects_by_region
from .answers import descriptions_from_numbered
from .config import PipelineConfig

log = logging.getLogger(__name__)

REGION_SLOTS = ("left", "right", "path")


class Completer(Protocol):
    def complete(self, request: ChatRequest, use_cache: bool = True) -> ChatResponse: ...


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image)).save(buf, format="PNG")
    return buf.getvalue()


@dataclass
class SceneContext:
    """Everything the prompts of one (scene, goal) pair need, computed once."""

    scene: SceneBundle
    goal: GoalPoint
    geometry: PathGeometry
    image: np.ndarray
    objects: tuple[DetectedObject, ...]
    region_objects: dict[str, list[DetectedObject]] = field(default_factory=dict)
    _png: dict[str, bytes] = field(default_factory=dict, repr=False)

    def image_bytes(self, region: str | None = None) -> bytes:
        key = region or "full"
        if key not in self._png:
            img = self.image if region is None else mask_image(self.image, self.geometry.masks.get(region))
            self._png[key] = encode_png(img)
        return self._png[key]

    def objects_for(self, slot: str) -> list[DetectedObject]:
        return self.region_objects[slot] if slot in REGION_SLOTS else list(self.objects)


def prepare_scene(scene: SceneBundle, goal: GoalPoint, config: PipelineConfig,
                  depth: DepthMap | None = None) -> SceneContext:
    """Geometry, masks and per-region objects; a supplied ``depth`` is used as is."""
    if depth is None:
        depth = scene.load_depth()
        if config.calibrate_depth:
            depth = calibrate_depth(depth, scene.camera, scene.detections)
    image = scene.load_image()
    if image.shape[:2] != depth.shape:
        raise GeometryError(f"scene {scene.scene_id}: image and depth sizes differ", code="dimension-mismatch")
    geo = build_path_geometry(depth, scene.camera, goal, n_samples=config.n_samples,
                              half_width_m=config.half_width_m, margin_m=config.cutoff_margin_m)
    objects = tuple(scene.detections) if config.include_detection_info else ()
    region_objects = {r: filter_objects_by_region(objects, geo.masks.get(r), config.min_overlap)
                      for r in REGION_SLOTS}
    return SceneContext(scene, geo.goal, geo, image, objects, region_objects)


def slot_bundle(ctx: SceneContext, slot: str, config: PipelineConfig,
                descriptions: DescriptionSet | None = None) -> PromptBundle:
    goal = (ctx.goal.x_norm, ctx.goal.y_norm)
    return build_region_bundle(slot, config.region_style, goal, objects=ctx.objects_for(slot),
                               start=START_POINT, descriptions=descriptions)


def _request(bundle: PromptBundle, image: bytes, config: PipelineConfig) -> ChatRequest:
    return ChatRequest.single(bundle.system_text, bundle.user_text, image, config.model_id,
                              temperature=config.temperature, max_tokens=config.max_tokens)


def describe_scene_multi_turn(ctx: SceneContext, config: PipelineConfig, gateway: Completer,
                              partial: DescriptionSet | None = None,
                              on_slot: Callable[[DescriptionSet], None] | None = None) -> DescriptionSet:
    """Six sequential calls, dest, left, right, path, desc, then reco.

    Slots already filled in ``partial`` are not re-queried. ``on_slot`` sees
    the set after every completed call so a caller can persist progress; a
    backend error propagates with that progress intact.
    """
    ds = partial if partial is not None else DescriptionSet()
    for slot in SLOTS:
        if ds.get(slot).strip():
            continue
        bundle = slot_bundle(ctx, slot, config, descriptions=ds if slot == "reco" else None)
        region = bundle.attach_masked_region.value if bundle.attach_masked_region else None
        resp = gateway.complete(_request(bundle, ctx.image_bytes(region), config))
        ds.set(slot, resp.text.strip())
        ds.latencies_s[slot] = resp.latency_s
        if on_slot is not None:
            on_slot(ds)
    return ds


def describe_scene_single_turn(ctx: SceneContext, config: PipelineConfig,
                               gateway: Completer) -> DescriptionSet:
    """One numbered-prompt call over the whole image; region style does not apply."""
    goal = (ctx.goal.x_norm, ctx.goal.y_norm)
    system, user = render_single_turn_prompt(START_POINT, goal, list(ctx.objects) or None)
    req = ChatRequest.single(system, user, ctx.image_bytes(), config.model_id,
                             temperature=config.temperature, max_tokens=config.max_tokens)
    resp = gateway.complete(req)
    ds = descriptions_from_numbered(resp.text)
    ds.latencies_s["single"] = resp.latency_s
    return ds


def describe_scene(ctx: SceneContext, config: PipelineConfig, gateway: Completer,
                   partial: DescriptionSet | None = None, on_slot=None) -> DescriptionSet:
    if config.mode == "single-turn":
        return describe_scene_single_turn(ctx, config, gateway)
    return describe_scene_multi_turn(ctx, config, gateway, partial, on_slot)


class PromptRecorder:
    """Stand-in for a gateway that keeps the rendered requests and answers placeholders.

    Used by dry runs: every prompt gets rendered, no backend sees it.
    """

    backend_id = "dry-run"

    def __init__(self):
        self.requests: list[ChatRequest] = []

    def complete(self, request: ChatRequest, use_cache: bool = True) -> ChatResponse:
        self.requests.append(request)
        if "1. Destination" in request.prompt_text:
            text = "\n".join(f"{n}. (dry run)" for n in range(1, 7))
        elif "'Follow the path' or 'Stop and wait'" in request.prompt_text:
            text = "Stop and wait. (dry run)"
        else:
            text = "(dry run)"
        return ChatResponse(text, 0.0, backend_id=self.backend_id)
