"""Seeded deterministic mock providers.

The mock provider is a pure function of (script seed, request): the RNG for
each call is seeded by the script seed XORed with the request fingerprint,
so identical requests always produce identical responses while different
prompts, images, or params diverge. Anything a test needs to vary (like a
trial index) must therefore travel inside the request's params.

Structured vision tasks are dispatched on params["task"]; fixtures let a
test override any (capability, prompt-pattern) with a scripted responder,
and a responder may delegate back to the defaults.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable, Final, Sequence

import numpy as np

from conceptstudio.errors import MalformedResponse, PreconditionError
from conceptstudio.model.raster import RasterImage
from conceptstudio.providers import procedural
from conceptstudio.providers.base import (
    Capability,
    ProviderRequest,
    ProviderResponse,
    Usage,
)

Responder = Callable[[ProviderRequest, np.random.Generator], ProviderResponse]


@dataclass(frozen=True)
class MockScript:
    """Seed plus scripted overrides, first matching fixture wins."""

    seed: int = 0
    fixtures: tuple[tuple[Capability, str, Responder], ...] = ()

    def with_fixture(
        self, capability: Capability, pattern: str, responder: Responder
    ) -> "MockScript":
        return MockScript(
            seed=self.seed, fixtures=self.fixtures + ((capability, pattern, responder),)
        )


def _text_response(text: str) -> ProviderResponse:
    tokens = max(1, len(text.split()))
    return ProviderResponse(
        text=text,
        usage=Usage(prompt_tokens=tokens, completion_tokens=tokens),
        latency_ms=1.0,
    )


def _strip_article(text: str) -> str:
    words = text.strip().split()
    if words and words[0].lower() in ("a", "an", "the"):
        words = words[1:]
    return " ".join(words)


# ---------------------------------------------------------------------------
# Default responders per structured task
# ---------------------------------------------------------------------------


def respond_refine(request: ProviderRequest, rng: np.random.Generator) -> ProviderResponse:
    marker = "Designer notes:"
    transcript = ""
    if marker in request.prompt:
        transcript = request.prompt.split(marker, 1)[1].strip()
    subject = _strip_article(transcript) or "hand-sketched product concept"
    return _text_response(
        f"description: {subject}\n"
        "style: clean product render\n"
        "placement: centered on a plain background"
    )


def respond_extract(request: ProviderRequest, rng: np.random.Generator) -> ProviderResponse:
    category = request.params.get("category") or procedural.sniff_category(request.prompt)
    pairs = procedural.EXTRACTED_PAIRS.get(category, procedural.EXTRACTED_PAIRS["car"])
    lines = [f"{function}: {solution}" for function, solution in pairs]
    return _text_response("\n".join(lines))


def _legend_from_params(request: ProviderRequest) -> dict[str, str]:
    raw = request.params.get("legend", "")
    if not raw:
        return {}
    try:
        legend = json.loads(raw)
    except json.JSONDecodeError:
        return {}
    return {str(k): str(v) for k, v in legend.items()}


def respond_map(request: ProviderRequest, rng: np.random.Generator) -> ProviderResponse:
    """Answer the color of the gold component, or none when unmapped."""
    category = request.params.get("category", "car")
    function = request.params.get("function", "")
    legend = _legend_from_params(request)
    gold = procedural.GOLD_MAPPINGS.get(category, {})
    target = gold.get(function)
    for color_name, class_label in legend.items():
        if class_label == target:
            return _text_response(color_name)
    return _text_response("none")


def respond_visibility(
    request: ProviderRequest, rng: np.random.Generator
) -> ProviderResponse:
    category = request.params.get("category", "car")
    function = request.params.get("function", "")
    invisible = procedural.INVISIBLE_FUNCTIONS.get(category, frozenset())
    if function in invisible:
        return _text_response("no - this change is internal and not visible in the image")
    return _text_response("yes - the affected component is visible in the image")


def respond_alternatives(
    request: ProviderRequest, rng: np.random.Generator
) -> ProviderResponse:
    function = request.params.get("function", "")
    solution = request.params.get("solution", "")
    count = int(request.params.get("n", "2"))
    canned = procedural.ALTERNATIVES.get(function, ())
    options = [alt for alt in canned if alt != solution][:count]
    fallbacks = (f"enhanced {solution}", f"simplified {solution}", f"modular {solution}")
    for fallback in fallbacks:
        if len(options) >= count:
            break
        if fallback not in options and fallback != solution:
            options.append(fallback)
    return _text_response("\n".join(options[:count]))


_VISION_TASKS: Final[dict[str, Responder]] = {
    "refine": respond_refine,
    "extract": respond_extract,
    "map": respond_map,
    "visibility": respond_visibility,
    "alternatives": respond_alternatives,
}


def respond_vision(request: ProviderRequest, rng: np.random.Generator) -> ProviderResponse:
    task = request.params.get("task", "")
    responder = _VISION_TASKS.get(task)
    if responder is None:
        raise MalformedResponse(
            f"mock vision provider has no default for task {task!r}",
            raw_text=request.prompt,
        )
    return responder(request, rng)


def respond_generate(
    request: ProviderRequest, rng: np.random.Generator
) -> ProviderResponse:
    category = request.params.get("category") or procedural.sniff_category(request.prompt)
    size = int(request.params.get("size", "512"))
    rgb, _ = procedural.draw_category(category, rng, size)
    return ProviderResponse(
        images=(RasterImage.from_array(rgb),),
        usage=Usage(prompt_tokens=len(request.prompt.split())),
        latency_ms=2.0,
    )


def respond_inpaint(request: ProviderRequest, rng: np.random.Generator) -> ProviderResponse:
    """Repaint only inside the mask: flat seeded color, alpha untouched."""
    base = request.images[0]
    assert request.mask is not None  # enforced by ProviderRequest
    pixels = base.to_array().copy()
    mask = np.frombuffer(request.mask, dtype=np.uint8).reshape(base.height, base.width)
    fill = rng.integers(0, 256, size=3, dtype=np.int64)
    inside = mask != 0
    pixels[inside, 0] = fill[0]
    pixels[inside, 1] = fill[1]
    pixels[inside, 2] = fill[2]
    return ProviderResponse(
        images=(RasterImage.from_array(pixels),),
        latency_ms=2.0,
    )


def respond_transcribe(
    request: ProviderRequest, rng: np.random.Generator
) -> ProviderResponse:
    assert request.audio is not None  # enforced by ProviderRequest
    try:
        text = request.audio.decode("utf-8")
    except UnicodeDecodeError:
        text = f"voice note {request.fingerprint()[:8]}"
    return _text_response(text.strip())


_CAPABILITY_DEFAULTS: Final[dict[Capability, Responder]] = {
    Capability.VISION: respond_vision,
    Capability.GENERATE: respond_generate,
    Capability.INPAINT: respond_inpaint,
    Capability.TRANSCRIBE: respond_transcribe,
}


class MockProvider:
    """Deterministic stand-in for all four capabilities."""

    def __init__(self, script: MockScript | None = None) -> None:
        self.script = script or MockScript()
        self.name = f"mock(seed={self.script.seed})"

    def _rng_for(self, request: ProviderRequest) -> np.random.Generator:
        fingerprint = int(request.fingerprint()[:16], 16)
        return np.random.Generator(np.random.PCG64(self.script.seed ^ fingerprint))

    def call(self, request: ProviderRequest) -> ProviderResponse:
        rng = self._rng_for(request)
        for capability, pattern, responder in self.script.fixtures:
            if capability is request.capability and re.search(
                pattern, request.prompt, re.IGNORECASE
            ):
                return responder(request, rng)
        default = _CAPABILITY_DEFAULTS.get(request.capability)
        if default is None:
            raise PreconditionError(f"unsupported capability {request.capability}")
        return default(request, rng)


def planted_error_script(
    seed: int, category: str, function: str, wrong_trials: Sequence[int]
) -> MockScript:
    """Script that answers the map task wrongly on the given trial indices.

    The wrong answer is the first legend color that is not the gold one, or
    `none` when the legend has a single color. Every other (function, trial)
    keeps the default gold answer, so an evaluation over T trials scores the
    corrupted function at (T - len(wrong_trials)) / T and the rest at 100%.
    """
    wrong = {str(t) for t in wrong_trials}

    def responder(request: ProviderRequest, rng: np.random.Generator) -> ProviderResponse:
        is_target = (
            request.params.get("function") == function
            and request.params.get("category", "car") == category
            and request.params.get("trial", "") in wrong
        )
        if not is_target:
            return respond_map(request, rng)
        legend = _legend_from_params(request)
        gold_label = procedural.GOLD_MAPPINGS[category][function]
        for color_name, class_label in legend.items():
            if class_label != gold_label:
                return _text_response(color_name)
        return _text_response("none")

    return MockScript(seed=seed).with_fixture(Capability.VISION, r"color region", responder)
