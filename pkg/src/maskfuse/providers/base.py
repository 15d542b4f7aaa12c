"""Provider capability names, connection handles, and the provider error family."""

from __future__ import annotations

from dataclasses import dataclass

PROBABILITY_MAP = "probability-map"
MASK_PROPOSALS = "mask-proposals"
SEGMENT = "promptable-segment"
CLICK_SUGGEST = "click-suggest"

CAPABILITIES = (PROBABILITY_MAP, MASK_PROPOSALS, SEGMENT, CLICK_SUGGEST)

BACKENDS = ("oracle", "http")


class ProviderError(RuntimeError):
    """Base class for provider failures; carries capability and endpoint context."""

    def __init__(self, message: str, *, capability: str = "", endpoint: str = ""):
        detail = message
        if capability:
            detail = f"[{capability}] {detail}"
        if endpoint:
            detail = f"{detail} (endpoint {endpoint})"
        super().__init__(detail)
        self.capability = capability
        self.endpoint = endpoint


class ProviderTransportError(ProviderError):
    """The request never completed: connection refused, reset, or timed out."""


class ProviderStatusError(ProviderError):
    """The server answered with a non-success status code."""

    def __init__(self, message: str, *, status: int, capability: str = "", endpoint: str = ""):
        super().__init__(message, capability=capability, endpoint=endpoint)
        self.status = status


class ProviderSchemaError(ProviderError):
    """The server answered 200 but the payload does not match the protocol."""


@dataclass(frozen=True)
class ProviderHandle:
    """How to reach one capability: backend kind plus transport settings.

    ``endpoint`` is the full URL of the capability route and is required for
    (and exclusive to) the ``http`` backend.  ``concurrency_limit`` bounds the
    number of in-flight requests through this handle.
    """

    capability: str
    backend: str = "oracle"
    endpoint: str | None = None
    timeout: float = 30.0
    concurrency_limit: int = 4
    token: str | None = None
    retry_backoff: float = 0.25

    def __post_init__(self):
        if self.capability not in CAPABILITIES:
            raise ValueError(f"unknown capability {self.capability!r}; expected one of {CAPABILITIES}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.backend == "http" and not self.endpoint:
            raise ValueError("http backend requires an endpoint URL")
        if self.backend == "oracle" and self.endpoint:
            raise ValueError("oracle backend does not take an endpoint")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be at least 1")
        if self.retry_backoff < 0:
            raise ValueError("retry_backoff must be non-negative")
