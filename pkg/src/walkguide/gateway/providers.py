"""Depth, detection and embedding providers.

File providers read per-scene sidecars and never touch the network; HTTP
providers POST the encoded image and expect a JSON reply.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx
import numpy as np

from ..errors import NoProvider, ValidationError
from ..geometry import DepthMap
from ..geometry.io import load_depth
from ..scene import DetectedObject, load_detections, parse_detections

log = logging.getLogger(__name__)


class DepthProvider(Protocol):
    def depth_infer(self, image: bytes, size: tuple[int, int], hint: Path | None = None) -> DepthMap: ...


class DetectionProvider(Protocol):
    def detect(self, image: bytes, hint: Path | None = None) -> list[DetectedObject]: ...


def _check_dims(depth: DepthMap, size: tuple[int, int]) -> DepthMap:
    if (depth.width_px, depth.height_px) != tuple(size):
        raise ValidationError(f"depth is {depth.width_px}x{depth.height_px}, image is {size[0]}x{size[1]}",
                              code="dimension-mismatch")
    return depth


class FileDepthProvider:
    """Reads the sidecar passed as ``hint``."""

    def depth_infer(self, image: bytes, size: tuple[int, int], hint: Path | None = None) -> DepthMap:
        if hint is None or not Path(hint).exists():
            raise NoProvider(f"no depth sidecar at {hint}", code="no-depth-provider")
        return _check_dims(load_depth(hint), size)


class HttpDepthProvider:
    """Expects ``{"width", "height", "depth": [[...], ...]}`` in metres."""

    def __init__(self, url: str, client: httpx.Client | None = None, timeout_s: float = 120.0):
        self.url = url
        self.timeout_s = timeout_s
        self._client = client or httpx.Client()

    def depth_infer(self, image: bytes, size: tuple[int, int], hint: Path | None = None) -> DepthMap:
        r = self._client.post(self.url, content=image, timeout=self.timeout_s,
                              headers={"Content-Type": "application/octet-stream"})
        r.raise_for_status()
        body = r.json()
        values = np.asarray(body["depth"], dtype=np.float32)
        if values.ndim != 2:
            raise ValidationError("depth endpoint must return a 2-D array", code="malformed-depth")
        return _check_dims(DepthMap(values), size)


class FileDetectionProvider:
    def detect(self, image: bytes, hint: Path | None = None) -> list[DetectedObject]:
        if hint is None:
            return []
        if not Path(hint).exists():
            raise NoProvider(f"no detection file at {hint}", code="no-detection-provider")
        return load_detections(hint)


class HttpDetectionProvider:
    """Expects ``{"objects": [{"label", "bbox", "score"}, ...]}`` with normalized boxes."""

    def __init__(self, url: str, client: httpx.Client | None = None, timeout_s: float = 120.0):
        self.url = url
        self.timeout_s = timeout_s
        self._client = client or httpx.Client()

    def detect(self, image: bytes, hint: Path | None = None) -> list[DetectedObject]:
        r = self._client.post(self.url, content=image, timeout=self.timeout_s,
                              headers={"Content-Type": "application/octet-stream"})
        r.raise_for_status()
        return parse_detections(r.json())


def depth_provider(spec: str | None) -> DepthProvider:
    """``file`` or an ``http(s)://`` URL; anything else has no provider."""
    if spec == "file":
        return FileDepthProvider()
    if spec and spec.startswith(("http://", "https://")):
        return HttpDepthProvider(spec)
    raise NoProvider(f"no depth provider configured ({spec!r})", code="no-depth-provider")


def detection_provider(spec: str | None) -> DetectionProvider:
    if spec in (None, "", "file"):
        return FileDetectionProvider()
    if spec.startswith(("http://", "https://")):
        return HttpDetectionProvider(spec)
    raise NoProvider(f"unknown detection provider {spec!r}", code="no-detection-provider")


class EmbeddingClient:
    """OpenAI-style ``/embeddings`` client, used for the optional embedding-F1 metric."""

    def __init__(self, base_url: str, model_id: str, token_env: str = "WALKGUIDE_API_KEY",
                 client: httpx.Client | None = None, timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.token_env = token_env
        self.timeout_s = timeout_s
        self._client = client or httpx.Client()

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        token = os.environ.get(self.token_env)
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        r = self._client.post(f"{self.base_url}/embeddings", json={"model": self.model_id, "input": list(texts)},
                              headers=headers, timeout=self.timeout_s)
        r.raise_for_status()
        data = sorted(r.json()["data"], key=lambda d: d["index"])
        return np.asarray([d["embedding"] for d in data], dtype=np.float64)


Embedder = Callable[[Sequence[str]], np.ndarray]
