"""Concept generation: brief refinement, candidate fan-out, pair extraction.

The flow is the first leg of the product pipeline: a sketch plus a spoken or
typed brief is refined into a structured description, the description feeds
the generation prompt, and the chosen candidate is mined for function-
solution pairs that seed the function chart.
"""

from __future__ import annotations

from dataclasses import dataclass

from conceptstudio.errors import (
    ContentPolicyRejection,
    ExtractionEmpty,
    GenerationFailed,
    MalformedResponse,
    PreconditionError,
)
from conceptstudio.model.documents import ConceptCandidate, DesignBrief, FunctionSolutionPair
from conceptstudio.model.raster import RasterImage
from conceptstudio.providers.base import Capability, ProviderRequest
from conceptstudio.providers.gateway import Gateway
from conceptstudio.providers.procedural import sniff_category
from conceptstudio.providers.templates import render_template

DEFAULT_CANDIDATES = 3
GENERATED_SIZE = 512


@dataclass(frozen=True)
class RefinementResult:
    """Structured refinement of a raw brief."""

    refined_description: str
    style_constraints: str = ""
    placement_constraints: str = ""

    def __post_init__(self) -> None:
        if not self.refined_description.strip():
            raise PreconditionError("refined description must be nonempty")


def _parse_refinement(text: str) -> RefinementResult:
    """Parse the strict three-line description/style/placement format."""
    fields = {"description": "", "style": "", "placement": ""}
    for line in text.splitlines():
        if ":" not in line:
            continue
        key, _, value = line.partition(":")
        key = key.strip().lower()
        if key in fields and not fields[key]:
            fields[key] = value.strip()
    if not fields["description"]:
        raise MalformedResponse(
            "refinement response has no description line", raw_text=text
        )
    none_like = ("", "none", "n/a", "-")
    return RefinementResult(
        refined_description=fields["description"],
        style_constraints="" if fields["style"].lower() in none_like else fields["style"],
        placement_constraints=(
            "" if fields["placement"].lower() in none_like else fields["placement"]
        ),
    )


def refine(gateway: Gateway, sketch: RasterImage | None, transcript: str) -> RefinementResult:
    """Refine sketch + transcript into a structured description.

    Either input may be absent, but not both. The raw provider text lands in
    the gateway audit log; unparseable text raises with the raw text kept.
    """
    if sketch is None and not transcript.strip():
        raise PreconditionError("refinement needs a sketch or a transcript")
    request = ProviderRequest(
        capability=Capability.VISION,
        prompt=render_template("refine_user", TRANSCRIPT=transcript.strip()),
        images=(sketch,) if sketch is not None else (),
        params={
            "task": "refine",
            "system": render_template("refine_system"),
        },
    )
    response = gateway.invoke(request)
    if not response.text:
        raise MalformedResponse("refinement response carried no text", raw_text="")
    return _parse_refinement(response.text)


def generation_prompt(result: RefinementResult) -> str:
    """Compose the generation prompt around the published phrasing.

    The refined description fills the object slot; style and placement
    constraints are appended verbatim as trailing sentences.
    """
    prompt = render_template("dataset_gen", Object_Name=result.refined_description)
    if result.style_constraints:
        prompt += f" Style: {result.style_constraints}."
    if result.placement_constraints:
        prompt += f" Placement: {result.placement_constraints}."
    return prompt


def make_brief(transcript: str, result: RefinementResult) -> DesignBrief:
    return DesignBrief(
        transcript=transcript,
        refined_description=result.refined_description,
        category=sniff_category(result.refined_description),
    )


def generate_candidates(
    gateway: Gateway,
    result: RefinementResult,
    n: int = DEFAULT_CANDIDATES,
    *,
    transcript: str = "",
    size: int = GENERATED_SIZE,
) -> list[ConceptCandidate]:
    """Generate n candidates, ordered by index, each at version 1.

    A per-candidate content policy rejection drops that slot and keeps the
    rest; only a fully empty set is an error.
    """
    if n < 1:
        raise PreconditionError(f"candidate count must be >= 1, got {n}")
    brief = make_brief(transcript, result)
    prompt = generation_prompt(result)
    candidates: list[ConceptCandidate] = []
    rejections: list[str] = []
    for index in range(n):
        request = ProviderRequest(
            capability=Capability.GENERATE,
            prompt=prompt,
            params={
                "candidate_index": str(index),
                "category": brief.category,
                "size": str(size),
            },
        )
        try:
            response = gateway.invoke(request)
        except ContentPolicyRejection as exc:
            rejections.append(f"candidate {index}: {exc}")
            continue
        candidates.append(ConceptCandidate(image=response.images[0], brief=brief))
    if not candidates:
        raise GenerationFailed(
            "every candidate was rejected: " + "; ".join(rejections)
        )
    return candidates


def parse_pair_lines(text: str) -> list[FunctionSolutionPair]:
    """Parse strict `function: solution` lines, collapsing duplicate
    functions and keeping the first occurrence."""
    seen: dict[str, FunctionSolutionPair] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or ":" not in line:
            continue
        function, _, solution = line.partition(":")
        function = function.strip()
        solution = solution.strip()
        if not function or not solution:
            continue
        key = function.lower()
        if key not in seen:
            seen[key] = FunctionSolutionPair(function=function, solution=solution)
    if not seen:
        raise ExtractionEmpty("no `function: solution` lines in provider response")
    return list(seen.values())


def extract_pairs(gateway: Gateway, candidate: ConceptCandidate) -> list[FunctionSolutionPair]:
    """Mine the candidate image for function-solution pairs."""
    if not candidate.brief.refined_description.strip():
        raise PreconditionError("candidate brief is not refined yet")
    request = ProviderRequest(
        capability=Capability.VISION,
        prompt=candidate.brief.refined_description,
        images=(candidate.image,),
        params={
            "task": "extract",
            "system": render_template("extract_system"),
            "category": candidate.brief.category,
        },
    )
    response = gateway.invoke(request)
    if not response.text:
        raise ExtractionEmpty("extraction response carried no text")
    return parse_pair_lines(response.text)


def serialize_pairs(pairs: list[FunctionSolutionPair]) -> list[dict]:
    return [{"function": p.function, "solution": p.solution} for p in pairs]


def deserialize_pairs(data: list[dict]) -> list[FunctionSolutionPair]:
    return [
        FunctionSolutionPair(function=item["function"], solution=item["solution"])
        for item in data
    ]
