"""Live HTTP adapters for the four capabilities.

Thin clients over an OpenAI-compatible surface: chat completions for vision
reasoning, image generations/edits for Generate/Inpaint, audio transcription
for Transcribe. Error taxonomy is normalized here so the gateway's retry
policy is provider-agnostic. These adapters are exercised by contract tests
only when credentials are present; offline runs use the mocks.
"""

from __future__ import annotations

import base64
import os
from dataclasses import dataclass

import httpx

from conceptstudio.errors import (
    ContentPolicyRejection,
    MalformedResponse,
    ProviderError,
    RateLimited,
    Timeout,
)
from conceptstudio.model.raster import RasterImage
from conceptstudio.providers.base import (
    Capability,
    ProviderRequest,
    ProviderResponse,
    Usage,
)

VISION_KEY_ENV = "CONCEPT_VISION_API_KEY"
IMAGE_KEY_ENV = "CONCEPT_IMAGE_API_KEY"


@dataclass(frozen=True)
class LiveEndpoints:
    vision_url: str = "https://api.openai.com/v1"
    image_url: str = "https://api.openai.com/v1"
    vision_model: str = "gpt-4-vision-preview"
    image_model: str = "dall-e-2"
    transcribe_model: str = "whisper-1"
    timeout_s: float = 60.0


def _api_key(env_var: str) -> str:
    key = os.environ.get(env_var, "")
    if not key:
        raise ProviderError(f"{env_var} is not set; live providers unavailable")
    return key


def _normalize_http_error(exc: Exception) -> ProviderError:
    if isinstance(exc, httpx.TimeoutException):
        return Timeout(str(exc))
    if isinstance(exc, httpx.HTTPStatusError):
        status = exc.response.status_code
        body = exc.response.text[:500]
        if status == 429:
            return RateLimited(f"rate limited: {body}")
        if status == 400 and "content_policy" in body:
            return ContentPolicyRejection(body)
        return ProviderError(f"provider returned {status}: {body}")
    if isinstance(exc, httpx.HTTPError):
        return Timeout(f"transport failure: {exc}")
    return ProviderError(str(exc))


def _data_url(image: RasterImage) -> str:
    return "data:image/png;base64," + base64.b64encode(image.to_png_bytes()).decode()


def _decode_image_payload(payload: dict) -> RasterImage:
    try:
        b64 = payload["data"][0]["b64_json"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(
            "image response missing data[0].b64_json", raw_text=str(payload)[:500]
        ) from exc
    return RasterImage.from_png_bytes(base64.b64decode(b64))


class LiveProvider:
    """One adapter instance serves all four capabilities."""

    def __init__(self, endpoints: LiveEndpoints | None = None) -> None:
        self.endpoints = endpoints or LiveEndpoints()
        self.name = "live"

    def call(self, request: ProviderRequest) -> ProviderResponse:
        handler = {
            Capability.VISION: self._vision,
            Capability.GENERATE: self._generate,
            Capability.INPAINT: self._inpaint,
            Capability.TRANSCRIBE: self._transcribe,
        }[request.capability]
        try:
            return handler(request)
        except ProviderError:
            raise
        except Exception as exc:
            raise _normalize_http_error(exc) from exc

    def _post(self, base: str, path: str, key: str, json_body: dict) -> dict:
        with httpx.Client(timeout=self.endpoints.timeout_s) as client:
            response = client.post(
                f"{base}{path}",
                headers={"Authorization": f"Bearer {key}"},
                json=json_body,
            )
            response.raise_for_status()
            return response.json()

    def _vision(self, request: ProviderRequest) -> ProviderResponse:
        key = _api_key(VISION_KEY_ENV)
        content: list[dict] = [{"type": "text", "text": request.prompt}]
        for image in request.images:
            content.append(
                {"type": "image_url", "image_url": {"url": _data_url(image)}}
            )
        messages = []
        system = request.params.get("system", "")
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": content})
        payload = self._post(
            self.endpoints.vision_url,
            "/chat/completions",
            key,
            {"model": self.endpoints.vision_model, "messages": messages},
        )
        try:
            text = payload["choices"][0]["message"]["content"]
            usage = payload.get("usage", {})
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(
                "chat response missing choices[0].message.content",
                raw_text=str(payload)[:500],
            ) from exc
        return ProviderResponse(
            text=text,
            usage=Usage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
        )

    def _generate(self, request: ProviderRequest) -> ProviderResponse:
        key = _api_key(IMAGE_KEY_ENV)
        size = int(request.params.get("size", "512"))
        payload = self._post(
            self.endpoints.image_url,
            "/images/generations",
            key,
            {
                "model": self.endpoints.image_model,
                "prompt": request.prompt,
                "size": f"{size}x{size}",
                "response_format": "b64_json",
            },
        )
        return ProviderResponse(images=(_decode_image_payload(payload),))

    def _inpaint(self, request: ProviderRequest) -> ProviderResponse:
        key = _api_key(IMAGE_KEY_ENV)
        base_image = request.images[0]
        # The edits endpoint treats transparent pixels as editable, so the
        # binary mask becomes an RGBA image with alpha 0 inside the region.
        mask_png = _mask_to_png(base_image, request.mask or b"")
        files = {
            "image": ("image.png", base_image.to_png_bytes(), "image/png"),
            "mask": ("mask.png", mask_png, "image/png"),
        }
        data = {
            "model": self.endpoints.image_model,
            "prompt": request.prompt,
            "size": f"{base_image.width}x{base_image.height}",
            "response_format": "b64_json",
        }
        with httpx.Client(timeout=self.endpoints.timeout_s) as client:
            response = client.post(
                f"{self.endpoints.image_url}/images/edits",
                headers={"Authorization": f"Bearer {key}"},
                data=data,
                files=files,
            )
            response.raise_for_status()
            payload = response.json()
        return ProviderResponse(images=(_decode_image_payload(payload),))

    def _transcribe(self, request: ProviderRequest) -> ProviderResponse:
        key = _api_key(VISION_KEY_ENV)
        files = {"file": ("audio.webm", request.audio or b"", "audio/webm")}
        data = {"model": self.endpoints.transcribe_model}
        with httpx.Client(timeout=self.endpoints.timeout_s) as client:
            response = client.post(
                f"{self.endpoints.vision_url}/audio/transcriptions",
                headers={"Authorization": f"Bearer {key}"},
                data=data,
                files=files,
            )
            response.raise_for_status()
            payload = response.json()
        text = payload.get("text")
        if not isinstance(text, str):
            raise MalformedResponse(
                "transcription response missing text", raw_text=str(payload)[:500]
            )
        return ProviderResponse(text=text)


def _mask_to_png(base: RasterImage, mask: bytes) -> bytes:
    import numpy as np

    rgba = base.to_array().copy()
    if rgba.shape[2] == 3:
        rgba = np.dstack([rgba, np.full(rgba.shape[:2], 255, dtype=np.uint8)])
    flat = np.frombuffer(mask, dtype=np.uint8).reshape(base.height, base.width)
    rgba[:, :, 3] = np.where(flat != 0, 0, 255).astype(np.uint8)
    return RasterImage.from_array(rgba).to_png_bytes()
