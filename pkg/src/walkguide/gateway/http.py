"""OpenAI-compatible chat-completions client."""

from __future__ import annotations

import base64
import os

import httpx

from ..errors import GatewayTimeout, RequestRejected, TransientBackendError, ValidationError
from .chat import BackendReply, ChatRequest

DEFAULT_TOKEN_ENV = "WALKGUIDE_API_KEY"


def sniff_mime(data: bytes) -> str:
    if data.startswith(b"\x89PNG"):
        return "image/png"
    if data.startswith(b"\xff\xd8"):
        return "image/jpeg"
    if data[:4] == b"RIFF" and data[8:12] == b"WEBP":
        return "image/webp"
    return "application/octet-stream"


def data_url(data: bytes) -> str:
    return f"data:{sniff_mime(data)};base64,{base64.b64encode(data).decode('ascii')}"


def build_payload(request: ChatRequest) -> dict:
    messages = [{"role": "system", "content": request.system_text}] if request.system_text else []
    for turn in request.user_turns:
        content = []
        if turn.image is not None:
            content.append({"type": "image_url", "image_url": {"url": data_url(turn.image)}})
        content.append({"type": "text", "text": turn.text})
        messages.append({"role": "user", "content": content})
    return {"model": request.model_id, "messages": messages,
            "temperature": request.temperature, "max_tokens": request.max_tokens}


def parse_completion(body: dict) -> BackendReply:
    try:
        text = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as e:
        raise TransientBackendError(f"malformed completion body: {e!r}") from None
    if isinstance(text, list):  # some servers return content parts
        text = "".join(p.get("text", "") for p in text if isinstance(p, dict))
    usage = body.get("usage") or {}
    return BackendReply(text, usage.get("prompt_tokens"), usage.get("completion_tokens"))


class OpenAIChatBackend:
    """POSTs to ``<base_url>/chat/completions``; the bearer token comes from the environment."""

    def __init__(self, base_url: str, token_env: str = DEFAULT_TOKEN_ENV,
                 client: httpx.Client | None = None, backend_id: str | None = None):
        if not base_url:
            raise ValidationError("chat backend needs a base URL", code="no-base-url")
        self.base_url = base_url.rstrip("/")
        self.token_env = token_env
        self.backend_id = backend_id or f"openai:{self.base_url}"
        self._client = client or httpx.Client()

    def _headers(self) -> dict[str, str]:
        token = os.environ.get(self.token_env)
        return {"Authorization": f"Bearer {token}"} if token else {}

    def chat(self, request: ChatRequest, timeout_s: float) -> BackendReply:
        try:
            r = self._client.post(f"{self.base_url}/chat/completions", json=build_payload(request),
                                  headers=self._headers(), timeout=timeout_s)
        except httpx.TimeoutException as e:
            raise GatewayTimeout(f"no response within {timeout_s:g}s") from e
        except httpx.TransportError as e:
            raise TransientBackendError(f"transport error: {e}") from e
        if 400 <= r.status_code < 500 and r.status_code not in (408, 429):
            raise RequestRejected(f"HTTP {r.status_code}", status=r.status_code, body=r.text)
        if r.status_code >= 400:
            raise TransientBackendError(f"HTTP {r.status_code}: {r.text[:200]}")
        try:
            body = r.json()
        except ValueError as e:
            raise TransientBackendError("non-JSON completion body") from e
        return parse_completion(body)

    def close(self) -> None:
        self._client.close()
