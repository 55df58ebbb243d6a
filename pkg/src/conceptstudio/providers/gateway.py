"""The provider gateway: one entry point for all capability calls.

Responsibilities: request validation, retry with exponential backoff on
transient failures (timeouts, rate limits — never policy rejections or
malformed payloads), a max-in-flight cap per provider, atomic call counters,
and a JSONL audit trail with secret redaction.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Final

from conceptstudio.errors import (
    PreconditionError,
    ProviderError,
    RateLimited,
    Timeout,
)
from conceptstudio.providers.base import (
    Capability,
    Provider,
    ProviderRequest,
    ProviderResponse,
)
from conceptstudio.providers.live import LiveEndpoints, LiveProvider
from conceptstudio.providers.mock import MockProvider, MockScript

MODE_ENV: Final = "CONCEPT_PROVIDER_MODE"
_RETRYABLE: Final = (Timeout, RateLimited)
_REDACT_MARKERS: Final = ("key", "token", "secret", "authorization")


@dataclass(frozen=True)
class GatewayConfig:
    """Operational knobs; loadable from a JSON config file."""

    mode: str = "mock"
    mock_seed: int = 0
    max_in_flight: int = 4
    attempts: int = 3
    backoff_base_s: float = 0.5
    audit_path: str | None = None
    endpoints: LiveEndpoints = field(default_factory=LiveEndpoints)

    def __post_init__(self) -> None:
        if self.mode not in ("mock", "live"):
            raise PreconditionError(f"provider mode must be mock or live, got {self.mode!r}")
        if self.attempts < 1 or self.max_in_flight < 1:
            raise PreconditionError("attempts and max_in_flight must be >= 1")

    @staticmethod
    def from_file(path: str | Path) -> "GatewayConfig":
        data = json.loads(Path(path).read_text())
        endpoints = LiveEndpoints(**data.pop("endpoints", {}))
        return GatewayConfig(endpoints=endpoints, **data)

    @staticmethod
    def from_env(default_mode: str = "mock") -> "GatewayConfig":
        return GatewayConfig(mode=os.environ.get(MODE_ENV, default_mode))


def redact(params: dict[str, str]) -> dict[str, str]:
    cleaned = {}
    for key, value in params.items():
        lowered = key.lower()
        if any(marker in lowered for marker in _REDACT_MARKERS):
            cleaned[key] = "***"
        else:
            cleaned[key] = value
    return cleaned


class Gateway:
    """Routes requests to one provider per mode with retry and audit."""

    def __init__(
        self,
        config: GatewayConfig | None = None,
        *,
        script: MockScript | None = None,
        provider: Provider | None = None,
        sleeper=time.sleep,
    ) -> None:
        self.config = config or GatewayConfig()
        if provider is not None:
            self.provider: Provider = provider
        elif self.config.mode == "mock":
            self.provider = MockProvider(script or MockScript(seed=self.config.mock_seed))
        else:
            self.provider = LiveProvider(self.config.endpoints)
        self._sleep = sleeper
        self._semaphore = threading.BoundedSemaphore(self.config.max_in_flight)
        self._counter_lock = threading.Lock()
        self.calls = 0
        self.retries = 0
        self.failures = 0
        self._audit_lock = threading.Lock()

    def _bump(self, counter: str) -> None:
        with self._counter_lock:
            setattr(self, counter, getattr(self, counter) + 1)

    def _audit(self, request: ProviderRequest, outcome: str, latency_ms: float) -> None:
        if not self.config.audit_path:
            return
        entry = {
            "ts": time.time(),
            "provider": self.provider.name,
            "capability": request.capability.value,
            "fingerprint": request.fingerprint(),
            "prompt": request.prompt,
            "params": redact(dict(request.params)),
            "images": [image.content_hash for image in request.images],
            "outcome": outcome,
            "latency_ms": round(latency_ms, 3),
        }
        line = json.dumps(entry, sort_keys=True) + "\n"
        with self._audit_lock:
            path = Path(self.config.audit_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("a", encoding="utf-8") as handle:
                handle.write(line)

    def invoke(self, request: ProviderRequest) -> ProviderResponse:
        """Call the provider; transient failures retry then propagate."""
        self._bump("calls")
        last_error: ProviderError | None = None
        with self._semaphore:
            for attempt in range(self.config.attempts):
                started = time.perf_counter()
                try:
                    response = self.provider.call(request)
                except _RETRYABLE as exc:
                    last_error = exc
                    self._audit(
                        request,
                        f"retryable:{type(exc).__name__}",
                        (time.perf_counter() - started) * 1000,
                    )
                    if attempt + 1 < self.config.attempts:
                        self._bump("retries")
                        self._sleep(self.config.backoff_base_s * (2**attempt))
                    continue
                except ProviderError as exc:
                    self._bump("failures")
                    self._audit(
                        request,
                        f"failed:{type(exc).__name__}",
                        (time.perf_counter() - started) * 1000,
                    )
                    raise
                latency_ms = (time.perf_counter() - started) * 1000
                if request.capability is Capability.GENERATE and not response.images:
                    self._bump("failures")
                    self._audit(request, "failed:EmptyGeneration", latency_ms)
                    raise ProviderError("generate response carried no images")
                self._audit(request, "ok", latency_ms)
                return response
        self._bump("failures")
        assert last_error is not None
        raise last_error
