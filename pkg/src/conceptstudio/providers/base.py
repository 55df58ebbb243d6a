"""Capability enum and the request/response envelope shared by all providers."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Protocol

from conceptstudio.errors import PreconditionError
from conceptstudio.model.raster import RasterImage


class Capability(str, Enum):
    VISION = "vision"
    GENERATE = "generate"
    INPAINT = "inpaint"
    TRANSCRIBE = "transcribe"


@dataclass(frozen=True)
class ProviderRequest:
    """One call into an external capability.

    mask is a binary mask (same size as the single image) marking the region
    an Inpaint call may repaint: nonzero = editable. params carry structured
    task context (system prompt, candidate count, trial index) and take part
    in the request fingerprint, so mocks stay pure functions of the request.
    """

    capability: Capability
    prompt: str = ""
    images: tuple[RasterImage, ...] = ()
    mask: bytes | None = None
    audio: bytes | None = None
    params: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "params", dict(self.params))
        if self.capability is Capability.INPAINT:
            if len(self.images) != 1:
                raise PreconditionError(
                    "inpaint requests carry exactly one image, got "
                    f"{len(self.images)}"
                )
            if self.mask is None:
                raise PreconditionError("inpaint requests carry exactly one mask")
            expected = self.images[0].width * self.images[0].height
            if len(self.mask) != expected:
                raise PreconditionError(
                    f"mask has {len(self.mask)} bytes for a "
                    f"{self.images[0].width}x{self.images[0].height} image"
                )
        elif self.mask is not None:
            raise PreconditionError("only inpaint requests carry a mask")
        if self.capability is Capability.TRANSCRIBE and self.audio is None:
            raise PreconditionError("transcribe requests carry audio")

    def fingerprint(self) -> str:
        """Stable hex digest of the full request content."""
        digest = hashlib.sha256()
        digest.update(self.capability.value.encode())
        digest.update(b"\x00")
        digest.update(self.prompt.encode("utf-8"))
        digest.update(b"\x00")
        for image in self.images:
            digest.update(bytes.fromhex(image.content_hash))
        digest.update(b"\x00")
        if self.mask is not None:
            digest.update(hashlib.sha256(self.mask).digest())
        digest.update(b"\x00")
        if self.audio is not None:
            digest.update(hashlib.sha256(self.audio).digest())
        digest.update(b"\x00")
        digest.update(
            json.dumps(self.params, sort_keys=True, separators=(",", ":")).encode()
        )
        return digest.hexdigest()


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost_cents: float = 0.0


@dataclass(frozen=True)
class ProviderResponse:
    text: str | None = None
    images: tuple[RasterImage, ...] = ()
    usage: Usage = Usage()
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))


class Provider(Protocol):
    """Anything the gateway can drive: one call, possibly raising ProviderError."""

    name: str

    def call(self, request: ProviderRequest) -> ProviderResponse: ...
