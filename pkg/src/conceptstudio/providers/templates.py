"""Prompt template registry.

Three templates are frozen verbatim from the product literature and guarded
by a pinned digest (see PAPER_VERBATIM_IDS); the rest are internal plumbing
prompts for the structured tasks the providers perform. Placeholders use
square-bracket markers ([NAME]) and rendering is a single simultaneous
substitution pass, so binding values are never rescanned for markers.

The edit template is stored exactly as published: "change function from
[SOLUTION_A] to [SOLUTION_B]". Callers bind the two solution slots with the
function name folded in ("wheel size 19 inches"); rendering lifts the longest
common leading word run out of the two bindings and substitutes it for the
literal word "function", which reproduces the published worked instantiation
"change wheel size from 19 inches to 20 inches".
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Final, Iterable, Mapping

from conceptstudio.errors import MissingPlaceholder, UnknownTemplate


def _fold_common_prefix(a: str, b: str) -> tuple[str, str, str]:
    """Split the longest shared leading word run off both strings.

    Returns (prefix, remainder_a, remainder_b), whitespace-normalized.
    At least one word is always left in each remainder so the rendered
    prompt never ends up with an empty slot.
    """
    words_a = a.split()
    words_b = b.split()
    limit = min(len(words_a), len(words_b)) - 1
    shared = 0
    while shared < limit and words_a[shared] == words_b[shared]:
        shared += 1
    if shared == 0:
        return "", a, b
    return (
        " ".join(words_a[:shared]),
        " ".join(words_a[shared:]),
        " ".join(words_b[shared:]),
    )


@dataclass(frozen=True)
class PromptTemplate:
    """A named prompt with declared placeholders.

    fold_function_prefix marks the one template whose bindings carry the
    function name folded into both solution slots; rendering un-folds it.
    """

    id: str
    template: str
    placeholders: tuple[str, ...] = ()
    fold_function_prefix: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("template id must be nonempty")
        if not self.template:
            raise ValueError(f"template {self.id!r} is empty")
        if len(set(self.placeholders)) != len(self.placeholders):
            raise ValueError(f"template {self.id!r} declares duplicate placeholders")
        for name in self.placeholders:
            if self.marker(name) not in self.template:
                raise ValueError(
                    f"template {self.id!r} never mentions placeholder [{name}]"
                )
        if self.fold_function_prefix and "function" not in self.template:
            raise ValueError(
                f"template {self.id!r} folds a function prefix but has no "
                "'function' word to replace"
            )

    @staticmethod
    def marker(name: str) -> str:
        return f"[{name}]"

    def render(self, bindings: Mapping[str, str] | None = None, /, **kw: str) -> str:
        """Substitute all placeholders; exact substitution, nothing else.

        Raises MissingPlaceholder if any declared placeholder is unbound and
        ValueError for bindings naming no declared placeholder.
        """
        merged: dict[str, str] = dict(bindings or {})
        merged.update(kw)
        missing = [n for n in self.placeholders if n not in merged]
        if missing:
            raise MissingPlaceholder(
                f"template {self.id!r} missing bindings: {', '.join(missing)}"
            )
        unknown = sorted(set(merged) - set(self.placeholders))
        if unknown:
            raise ValueError(
                f"template {self.id!r} has no placeholders {', '.join(unknown)}"
            )

        substitutions = {self.marker(n): merged[n] for n in self.placeholders}
        if self.fold_function_prefix:
            prefix, rest_a, rest_b = _fold_common_prefix(
                merged["SOLUTION_A"], merged["SOLUTION_B"]
            )
            if prefix:
                substitutions["function"] = prefix
                substitutions[self.marker("SOLUTION_A")] = rest_a
                substitutions[self.marker("SOLUTION_B")] = rest_b
        if not substitutions:
            return self.template

        # Single pass, longest marker first so no marker shadows another.
        pattern = re.compile(
            "|".join(re.escape(m) for m in sorted(substitutions, key=len, reverse=True))
        )
        return pattern.sub(lambda m: substitutions[m.group(0)], self.template)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

# Frozen verbatim from the published system; edits fail the pinned-digest test.
DATASET_GEN: Final = PromptTemplate(
    id="dataset_gen",
    template="a realistic [Object_Name] shown in an isometric perspective and in a clean background",
    placeholders=("Object_Name",),
)
VISIBILITY: Final = PromptTemplate(
    id="visibility",
    template="analyze if this function is visible in the image",
)
EDIT_FUNCTION: Final = PromptTemplate(
    id="edit_function",
    template="change function from [SOLUTION_A] to [SOLUTION_B]",
    placeholders=("SOLUTION_A", "SOLUTION_B"),
    fold_function_prefix=True,
)

# Internal task prompts (ours, not published material).
REFINE_SYSTEM: Final = PromptTemplate(
    id="refine_system",
    template=(
        "You are helping a product designer turn a rough sketch and spoken "
        "notes into a concept description. Respond with exactly three lines:\n"
        "description: <one-sentence product description>\n"
        "style: <style requirements, or none>\n"
        "placement: <placement or layout requirements, or none>"
    ),
)
REFINE_USER: Final = PromptTemplate(
    id="refine_user",
    template="The sketch is attached. Designer notes: [TRANSCRIPT]",
    placeholders=("TRANSCRIPT",),
)
EXTRACT_SYSTEM: Final = PromptTemplate(
    id="extract_system",
    template=(
        "Identify the design functions visible in this concept image and the "
        "solution chosen for each. Respond with one pair per line in the "
        "exact format `function: solution`. No numbering, no other text."
    ),
)
MAP_FUNCTION: Final = PromptTemplate(
    id="map_function",
    template=(
        "The image shows a product with its components overlaid in distinct "
        "transparent colors. Legend: [LEGEND]. Which color region is most "
        "likely associated with the function `[FUNCTION]`? Answer with "
        "exactly one color name from the legend, or `none`."
    ),
    placeholders=("LEGEND", "FUNCTION"),
)
ALTERNATIVES: Final = PromptTemplate(
    id="alternatives",
    template=(
        "Propose [N] alternative solutions for the function `[FUNCTION]` of "
        "this product. The current solution is `[SOLUTION]`. Respond with one "
        "alternative per line, no numbering, no other text."
    ),
    placeholders=("N", "FUNCTION", "SOLUTION"),
)
VISIBILITY_CONTEXT: Final = PromptTemplate(
    id="visibility_context",
    template=(
        "The image shows a product concept. The function in question is "
        "`[FUNCTION]` with current solution `[SOLUTION]`. Answer yes or no "
        "first, then a short justification."
    ),
    placeholders=("FUNCTION", "SOLUTION"),
)

PAPER_VERBATIM_IDS: Final[tuple[str, ...]] = ("dataset_gen", "edit_function", "visibility")

REGISTRY: Final[dict[str, PromptTemplate]] = {
    t.id: t
    for t in (
        DATASET_GEN,
        VISIBILITY,
        EDIT_FUNCTION,
        REFINE_SYSTEM,
        REFINE_USER,
        EXTRACT_SYSTEM,
        MAP_FUNCTION,
        ALTERNATIVES,
        VISIBILITY_CONTEXT,
    )
}


def get_template(template_id: str) -> PromptTemplate:
    try:
        return REGISTRY[template_id]
    except KeyError:
        raise UnknownTemplate(f"no template registered as {template_id!r}") from None


def render_template(
    template_id: str, bindings: Mapping[str, str] | None = None, /, **kw: str
) -> str:
    return get_template(template_id).render(bindings, **kw)


def registry_digest(ids: Iterable[str] | None = None) -> str:
    """SHA-256 over a canonical dump of the selected templates.

    Defaults to the verbatim subset; the golden test pins this value so any
    drift in the published strings is caught immediately.
    """
    selected = sorted(ids) if ids is not None else list(PAPER_VERBATIM_IDS)
    entries = [
        {
            "id": t.id,
            "template": t.template,
            "placeholders": list(t.placeholders),
        }
        for t in (get_template(i) for i in selected)
    ]
    canonical = json.dumps(entries, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
