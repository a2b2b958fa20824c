from ..errors import ValidationError
from .cache import DiskCache, MemoryCache
from .chat import (
    BackendReply,
    ChatBackend,
    ChatRequest,
    ChatResponse,
    Gateway,
    GatewayStats,
    UserTurn,
    ask,
)
from .http import OpenAIChatBackend, build_payload, data_url, parse_completion
from .providers import (
    EmbeddingClient,
    FileDepthProvider,
    FileDetectionProvider,
    HttpDepthProvider,
    HttpDetectionProvider,
    depth_provider,
    detection_provider,
)
from .stubs import (
    CountingBackend,
    EchoBackend,
    FlakyBackend,
    RecordingBackend,
    SceneStub,
    ScriptedBackend,
    stub_backend,
)


def make_backend(spec: str, token_env: str = "WALKGUIDE_API_KEY", base_url: str | None = None):
    """``stub...`` specs build an in-process stub; ``openai`` or a URL builds the HTTP client."""
    if spec.startswith("stub"):
        return stub_backend(spec)
    if spec.startswith(("http://", "https://")):
        return OpenAIChatBackend(spec, token_env)
    if spec == "openai":
        return OpenAIChatBackend(base_url or "", token_env)
    raise ValidationError(f"unknown backend spec {spec!r}", code="bad-backend")
