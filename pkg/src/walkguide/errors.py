"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (e.g. ``"degenerate-path"``)
so batch runners can aggregate failure reasons without parsing messages.
"""

from __future__ import annotations


class WalkGuideError(Exception):
    code = "error"

    def __init__(self, message: str = "", *, code: str | None = None):
        if code is not None:
            self.code = code
        super().__init__(message or self.code)

    def __str__(self) -> str:
        msg = super().__str__()
        return msg if msg.startswith(self.code) else f"{self.code}: {msg}"


class GeometryError(WalkGuideError, ValueError):
    code = "geometry-error"


class ValidationError(WalkGuideError, ValueError):
    code = "validation-error"


class PromptError(WalkGuideError, ValueError):
    code = "prompt-error"


class GatewayError(WalkGuideError):
    code = "gateway-error"


class BackendUnavailable(GatewayError):
    code = "backend-unavailable"


class RequestRejected(GatewayError):
    code = "request-rejected"

    def __init__(self, message: str = "", *, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class GatewayTimeout(GatewayError):
    code = "timeout"


class TransientBackendError(GatewayError):
    """Raised by backends for failures worth retrying (5xx, connection reset)."""

    code = "transient"


class NoProvider(GatewayError):
    code = "no-provider"


class ParseFailure(WalkGuideError, ValueError):
    code = "parse-failure"

    def __init__(self, message: str = "", *, raw: str = "", missing: list[int] | None = None):
        super().__init__(message)
        self.raw = raw
        self.missing = missing or []


class IncompleteDescriptions(WalkGuideError, ValueError):
    code = "incomplete-descriptions"


class EvaluationError(WalkGuideError, ValueError):
    code = "evaluation-error"
