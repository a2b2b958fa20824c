"""Vision-chat request/response types, cache keys and the retrying gateway."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from ..errors import (
    BackendUnavailable,
    GatewayTimeout,
    RequestRejected,
    TransientBackendError,
    ValidationError,
)
from .cache import DiskCache, MemoryCache

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 120.0
DEFAULT_ATTEMPTS = 3
DEFAULT_BACKOFF_S = 1.0


@dataclass(frozen=True)
class UserTurn:
    text: str
    image: bytes | None = None


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_turns: tuple[UserTurn, ...]
    model_id: str
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        turns = tuple(t if isinstance(t, UserTurn) else UserTurn(*t) for t in self.user_turns)
        if not turns:
            raise ValidationError("chat request needs at least one user turn", code="empty-request")
        for t in turns:
            if t.image is not None and not isinstance(t.image, (bytes, bytearray)):
                raise ValidationError("one encoded image (bytes) per turn at most", code="bad-attachment")
        object.__setattr__(self, "user_turns", turns)

    @classmethod
    def single(cls, system_text: str, text: str, image: bytes | None, model_id: str, **decoding):
        return cls(system_text, (UserTurn(text, image),), model_id, **decoding)

    def cache_key(self) -> str:
        h = hashlib.sha256()
        header = {"system": self.system_text, "model": self.model_id,
                  "temperature": self.temperature, "max_tokens": self.max_tokens,
                  "turns": [t.text for t in self.user_turns]}
        h.update(json.dumps(header, sort_keys=True, ensure_ascii=False).encode())
        for t in self.user_turns:
            h.update(b"\x01" if t.image is not None else b"\x00")
            if t.image is not None:
                h.update(hashlib.sha256(t.image).digest())
        return h.hexdigest()

    @property
    def prompt_text(self) -> str:
        return "\n".join(t.text for t in self.user_turns)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    latency_s: float
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    backend_id: str = ""
    cache_hit: bool = False

    def to_dict(self) -> dict:
        return {"text": self.text, "latency_s": self.latency_s, "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens, "backend_id": self.backend_id}

    @classmethod
    def from_dict(cls, d: dict, cache_hit: bool = False) -> "ChatResponse":
        return cls(text=d["text"], latency_s=float(d["latency_s"]), prompt_tokens=d.get("prompt_tokens"),
                   completion_tokens=d.get("completion_tokens"), backend_id=d.get("backend_id", ""),
                   cache_hit=cache_hit)


@dataclass(frozen=True)
class BackendReply:
    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


class ChatBackend(Protocol):
    backend_id: str

    def chat(self, request: ChatRequest, timeout_s: float) -> BackendReply:
        """Raise TransientBackendError, GatewayTimeout or RequestRejected on failure."""


@dataclass
class GatewayStats:
    backend_calls: int = 0
    cache_hits: int = 0
    retries: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, name: str) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + 1)


class Gateway:
    """Shareable front door for one chat backend.

    Requests are bounded by ``max_in_flight``; transient failures and timeouts
    are retried with exponential backoff. Successful responses go into the
    cache, and a cache hit reports the latency of the original call.
    """

    def __init__(self, backend: ChatBackend, cache: DiskCache | MemoryCache | None = None, *,
                 attempts: int = DEFAULT_ATTEMPTS, backoff_s: float = DEFAULT_BACKOFF_S,
                 timeout_s: float = DEFAULT_TIMEOUT_S, max_in_flight: int = 4):
        if attempts < 1 or max_in_flight < 1:
            raise ValueError("attempts and max_in_flight must be positive")
        self.backend = backend
        self.cache = cache
        self.attempts = attempts
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self.stats = GatewayStats()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    @property
    def backend_id(self) -> str:
        return getattr(self.backend, "backend_id", type(self.backend).__name__)

    def complete(self, request: ChatRequest, use_cache: bool = True) -> ChatResponse:
        key = request.cache_key()
        if use_cache and self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                self.stats.bump("cache_hits")
                return ChatResponse.from_dict(hit, cache_hit=True)
        response = self._call_with_retries(request)
        if self.cache is not None:
            self.cache.put(key, response.to_dict())
        return response

    def _call_with_retries(self, request: ChatRequest) -> ChatResponse:
        last: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self.stats.bump("retries")
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            with self._slots:
                self.stats.bump("backend_calls")
                t0 = time.perf_counter()
                try:
                    reply = self.backend.chat(request, self.timeout_s)
                except RequestRejected:
                    raise
                except (TransientBackendError, GatewayTimeout) as e:
                    last = e
                    log.warning("%s attempt %d/%d failed: %s", self.backend_id, attempt + 1,
                                self.attempts, e)
                    continue
                latency = time.perf_counter() - t0
            if reply.text is None:
                last = TransientBackendError("backend returned no text")
                continue
            return ChatResponse(reply.text, latency, reply.prompt_tokens, reply.completion_tokens,
                                self.backend_id)
        if isinstance(last, GatewayTimeout):
            raise GatewayTimeout(f"{self.backend_id}: timed out after {self.attempts} attempts")
        raise BackendUnavailable(f"{self.backend_id}: {self.attempts} attempts failed ({last})")


def ask(gateway: Gateway, system_text: str, user_text: str, image: bytes | None, model_id: str,
        use_cache: bool = True, **decoding) -> ChatResponse:
    return gateway.complete(ChatRequest.single(system_text, user_text, image, model_id, **decoding),
                            use_cache=use_cache)


def turns(*pairs: Sequence) -> tuple[UserTurn, ...]:
    return tuple(UserTurn(*p) for p in pairs)
