"""In-process chat backends for tests, dry runs and offline demos."""

from __future__ import annotations

import hashlib
import re
import threading
import time
from typing import Callable, Sequence

from ..errors import GatewayTimeout, TransientBackendError, ValidationError
from .chat import BackendReply, ChatRequest


class RecordingBackend:
    """Base class: keeps every request it receives, thread-safely."""

    backend_id = "stub"

    def __init__(self):
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.requests)

    def _record(self, request: ChatRequest) -> int:
        with self._lock:
            self.requests.append(request)
            return len(self.requests)

    def chat(self, request: ChatRequest, timeout_s: float) -> BackendReply:
        n = self._record(request)
        return BackendReply(self.respond(request, n))

    def respond(self, request: ChatRequest, n: int) -> str:
        raise NotImplementedError


class EchoBackend(RecordingBackend):
    backend_id = "stub:echo"

    def __init__(self, text: str = "ok"):
        super().__init__()
        self.text = text

    def respond(self, request, n):
        return self.text


class ScriptedBackend(RecordingBackend):
    """Replies from a list (cycled) or a ``fn(request, call_number)``."""

    backend_id = "stub:scripted"

    def __init__(self, script: Sequence[str] | Callable[[ChatRequest, int], str]):
        super().__init__()
        self.script = script

    def respond(self, request, n):
        if callable(self.script):
            return self.script(request, n)
        return self.script[(n - 1) % len(self.script)]


class FlakyBackend(RecordingBackend):
    """Fails the first ``failures`` calls, then answers ``text``."""

    backend_id = "stub:flaky"

    def __init__(self, failures: int, text: str = "ok", timeout: bool = False):
        super().__init__()
        self.failures = failures
        self.text = text
        self.timeout = timeout

    def respond(self, request, n):
        if n <= self.failures:
            if self.timeout:
                raise GatewayTimeout(f"stub timeout on call {n}")
            raise TransientBackendError(f"stub failure on call {n}")
        return self.text


class CountingBackend(RecordingBackend):
    """Sleeps ``delay_s`` per call and tracks peak concurrency."""

    backend_id = "stub:counting"

    def __init__(self, text: str = "ok", delay_s: float = 0.0):
        super().__init__()
        self.text = text
        self.delay_s = delay_s
        self.in_flight = 0
        self.peak_in_flight = 0

    def chat(self, request, timeout_s):
        self._record(request)
        with self._lock:
            self.in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
        try:
            if self.delay_s:
                time.sleep(self.delay_s)
            return BackendReply(self.text)
        finally:
            with self._lock:
                self.in_flight -= 1


_OBJECTS_RE = re.compile(r"The image contains objects, (.*)\.\s*$", re.S)
_LABEL_RE = re.compile(r"([a-z][a-z /:-]*?) \[[0-9., ]+\]")
_JUDGE_RE = re.compile(r"<\|The Start of Reference Description\|>\n(.*?)\n<\|The End of Reference Description\|>"
                       r".*?<\|The Start of Assistant A's Description\|>\n(.*?)\n<\|The End", re.S)


_SLOT_MARKERS = (("left", "closely to the left of the path"), ("right", "closely to the right of the path"),
                 ("path", "what objects are on the path"), ("dest", "description of the destination"))


def clause_labels(system_text: str) -> list[str]:
    m = _OBJECTS_RE.search(system_text)
    return _LABEL_RE.findall(m.group(1)) if m else []


def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z]+", text.lower()))


class SceneStub(RecordingBackend):
    """Deterministic pseudo-model that reads the prompt it is given.

    Region answers name the objects of the detection clause, the recommendation
    says stop when the path description names an obstacle, numbered prompts get
    six numbered sections, and judge prompts get a rating derived from word
    overlap between reference and candidate. ``variant`` changes the wording so
    two stubs can play two different models.
    """

    def __init__(self, variant: str = "a"):
        super().__init__()
        self.variant = variant
        self.backend_id = f"stub:scene:{variant}"

    def _pick(self, request: ChatRequest, options: Sequence[str]) -> str:
        h = hashlib.sha256((self.variant + request.cache_key()).encode()).digest()
        return options[h[0] % len(options)]

    def _things(self, labels: list[str]) -> str:
        return " and ".join(dict.fromkeys(labels)) if labels else "nothing"

    def _region(self, slot: str, labels: list[str]) -> str:
        things = self._things(labels)
        if slot == "dest":
            return "The destination is ahead on the sidewalk." if self.variant == "a" \
                else "The destination is straight ahead on the walkway."
        if slot == "path":
            return f"There are {things} on the path."
        if slot in ("left", "right"):
            return f"There are {things} on the {slot} side."
        return "The user is on a sidewalk." if self.variant == "a" else "The user is walking on a street."

    def _reco(self, path_text: str) -> str:
        if "nothing on the path" in path_text or not path_text:
            return "Follow the path. The path is clear of obstacles, so walking to the destination is possible."
        return f"Stop and wait. {path_text} Walking to the destination is impossible."

    def respond(self, request, n):
        user = request.prompt_text
        system = request.system_text
        if "impartial judge" in system:
            m = _JUDGE_RE.search(user)
            ref, cand = (m.group(1), m.group(2)) if m else ("", user)
            a, b = _tokens(ref), _tokens(cand)
            overlap = len(a & b) / len(a | b) if a | b else 0.0
            rating = 1 + round(9 * overlap)
            return f"The description is compared with the reference. Rating: [[{rating}]]"
        labels = clause_labels(system)
        if "select the most appropriate action" in user and "1. Destination" not in user:
            path = re.search(r"(There are [^.]* on the path\.)", user)
            return self._reco(path.group(1) if path else "")
        if "1. Destination" in user:
            path_text = self._region("path", [])
            return "\n".join([
                "1. Destination (x, y) Description: " + self._region("dest", labels),
                "2. Left Side of the Path: " + self._region("left", []),
                "3. Right Side of the Path: " + self._region("right", []),
                "4. Path Description: " + path_text,
                "5. Overall Scene and Pedestrian Traffic Light: " + self._region("desc", []),
                "6. Walkability Evaluation: " + self._reco(path_text),
            ])
        for slot, marker in _SLOT_MARKERS:
            if marker in user:
                return self._region(slot, labels if slot != "dest" else [])
        return self._region("desc", labels)


def stub_backend(spec: str) -> RecordingBackend:
    """Backend from ``stub``, ``stub:scene[:variant]``, ``stub:echo:<text>`` or ``stub:flaky:<n>``."""
    parts = spec.split(":", 2)
    if parts[0] != "stub":
        raise ValidationError(f"not a stub backend spec: {spec!r}", code="bad-backend")
    kind = parts[1] if len(parts) > 1 else "scene"
    arg = parts[2] if len(parts) > 2 else None
    if kind == "scene":
        return SceneStub(arg or "a")
    if kind == "echo":
        return EchoBackend(arg or "ok")
    if kind == "flaky":
        return FlakyBackend(int(arg or 1))
    raise ValidationError(f"unknown stub kind {kind!r}", code="bad-backend")
