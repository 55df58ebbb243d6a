"""Function-to-visual mapping: color overlays, region queries, charts.

Components get distinct transparent color overlays (alpha 0.5), the vision
provider is asked which color region realizes each function, and every
mapped function lands in a per-component chart holding its current solution
plus exactly two alternatives. Colors are referred to by *name* in prompts
so parsing is a closed-set, case-insensitive match against the legend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Final, Iterable, Sequence

import numpy as np

from conceptstudio.errors import PaletteExhausted, PreconditionError
from conceptstudio.model.documents import FunctionSolutionPair
from conceptstudio.model.raster import RasterImage
from conceptstudio.providers.base import Capability, ProviderRequest
from conceptstudio.providers.templates import render_template
from conceptstudio.segmentation.schema import ComponentRegion

if TYPE_CHECKING:
    # runtime import would close a cycle through providers.mock -> procedural
    from conceptstudio.providers.gateway import Gateway

Rgb = tuple[int, int, int]

# Fixed overlay palette, assigned to regions by index. Pairwise channel-space
# L2 distance is at least 127 (red/orange), comfortably above the 120 floor.
PALETTE: Final[tuple[tuple[str, Rgb], ...]] = (
    ("red", (255, 0, 0)),
    ("blue", (0, 0, 255)),
    ("green", (0, 255, 0)),
    ("yellow", (255, 255, 0)),
    ("magenta", (255, 0, 255)),
    ("cyan", (0, 255, 255)),
    ("orange", (255, 128, 0)),
    ("purple", (128, 0, 255)),
)

OVERLAY_ALPHA: Final = 0.5


def assign_palette(regions: Sequence[ComponentRegion]) -> list[ComponentRegion]:
    """Give each region the next palette color, in region order."""
    if len(regions) > len(PALETTE):
        raise PaletteExhausted(
            f"{len(regions)} regions exceed the {len(PALETTE)}-color palette"
        )
    return [
        replace(region, color_name=name, overlay_color=rgb)
        for region, (name, rgb) in zip(regions, PALETTE)
    ]


def _check_disjoint(regions: Sequence[ComponentRegion]) -> None:
    if not regions:
        raise PreconditionError("need at least one region")
    stacked = np.zeros(regions[0].mask.shape, dtype=np.int32)
    for region in regions:
        if region.mask.shape != regions[0].mask.shape:
            raise PreconditionError("region masks must share one shape")
        stacked += region.mask
    if (stacked > 1).any():
        raise PreconditionError("region masks overlap")


def build_overlay(
    image: RasterImage, regions: Sequence[ComponentRegion]
) -> tuple[RasterImage, dict[str, str]]:
    """Blend each region's color at alpha 0.5; untouched pixels stay exact.

    Blending is integer round-half-up: out = floor((base + color) / 2 + 0.5),
    so a pure-white pixel under red becomes (255, 128, 128). Returns the
    composited image and a legend mapping color name -> class label.
    """
    colored = assign_palette(list(regions)) if regions and regions[0].color_name is None else list(regions)
    _check_disjoint(colored)
    pixels = image.to_array().copy()
    if colored[0].mask.shape != pixels.shape[:2]:
        raise PreconditionError("region masks do not match the image size")
    legend: dict[str, str] = {}
    for region in colored:
        assert region.overlay_color is not None and region.color_name is not None
        color = np.array(region.overlay_color, dtype=np.uint16)
        area = region.mask
        base = pixels[area, :3].astype(np.uint16)
        pixels[area, :3] = ((base + color + 1) // 2).astype(np.uint8)
        legend[region.color_name] = region.class_label
    return RasterImage.from_array(pixels), legend


def legend_text(legend: dict[str, str]) -> str:
    return ", ".join(f"{color}: {label}" for color, label in legend.items())


@dataclass(frozen=True)
class MappingResult:
    """Partition of the input functions into assigned and unmapped."""

    assignments: dict[str, str]
    unmapped: tuple[str, ...]

    def __post_init__(self) -> None:
        overlap = set(self.assignments) & set(self.unmapped)
        if overlap:
            raise PreconditionError(f"functions in both partitions: {overlap}")


def _normalize_answer(text: str) -> str:
    return text.strip().strip(".`'\"").lower()


def map_functions(
    gateway: Gateway,
    overlay: RasterImage,
    legend: dict[str, str],
    pairs: Sequence[FunctionSolutionPair],
    *,
    category: str = "",
    trial: int | None = None,
) -> MappingResult:
    """Ask the vision provider for each function's color region.

    One query per function, in pair order. Only exact (case-insensitive)
    legend color names count as answers; anything else sends the function
    to unmapped rather than guessing.
    """
    if not legend:
        raise PreconditionError("legend must not be empty")
    if not pairs:
        raise PreconditionError("need at least one function-solution pair")
    lowered = {name.lower(): name for name in legend}
    assignments: dict[str, str] = {}
    unmapped: list[str] = []
    for pair in pairs:
        params = {
            "task": "map",
            "category": category,
            "function": pair.function,
            "legend": json.dumps(legend, sort_keys=True),
        }
        if trial is not None:
            params["trial"] = str(trial)
        request = ProviderRequest(
            capability=Capability.VISION,
            prompt=render_template(
                "map_function", LEGEND=legend_text(legend), FUNCTION=pair.function
            ),
            images=(overlay,),
            params=params,
        )
        answer = _normalize_answer(gateway.invoke(request).text or "")
        if answer in lowered:
            assignments[pair.function] = legend[lowered[answer]]
        else:
            unmapped.append(pair.function)
    return MappingResult(assignments=assignments, unmapped=tuple(unmapped))


@dataclass(frozen=True)
class ChartEntry:
    function: str
    current: str
    alternatives: tuple[str, str]

    def __post_init__(self) -> None:
        solutions = (self.current, *self.alternatives)
        if len({s.lower() for s in solutions}) != 3:
            raise PreconditionError(
                f"chart entry for {self.function!r} needs 3 distinct solutions, "
                f"got {solutions}"
            )

    @property
    def solutions(self) -> tuple[str, str, str]:
        return (self.current, *self.alternatives)


@dataclass(frozen=True)
class FunctionChart:
    """Per-component chart plus the functions that could not be mapped."""

    components: dict[str, tuple[ChartEntry, ...]]
    unmapped: tuple[str, ...] = ()

    def entry_for(self, function: str) -> tuple[str, ChartEntry]:
        for component, entries in self.components.items():
            for entry in entries:
                if entry.function == function:
                    return component, entry
        raise PreconditionError(f"function {function!r} is not in the chart")

    @property
    def entry_count(self) -> int:
        return sum(len(entries) for entries in self.components.values())

    def to_dict(self) -> dict:
        return {
            "components": {
                component: [
                    {
                        "function": entry.function,
                        "current": entry.current,
                        "alternatives": list(entry.alternatives),
                    }
                    for entry in entries
                ]
                for component, entries in self.components.items()
            },
            "unmapped": list(self.unmapped),
        }

    @staticmethod
    def from_dict(data: dict) -> "FunctionChart":
        return FunctionChart(
            components={
                component: tuple(
                    ChartEntry(
                        function=item["function"],
                        current=item["current"],
                        alternatives=(item["alternatives"][0], item["alternatives"][1]),
                    )
                    for item in entries
                )
                for component, entries in data["components"].items()
            },
            unmapped=tuple(data.get("unmapped", ())),
        )


def _parse_alternatives(text: str, current: str, needed: int) -> list[str]:
    seen: list[str] = []
    for line in text.splitlines():
        candidate = line.strip().strip("-* ").strip()
        if not candidate:
            continue
        if candidate.lower() == current.lower():
            continue
        if any(candidate.lower() == other.lower() for other in seen):
            continue
        seen.append(candidate)
        if len(seen) == needed:
            break
    return seen


def _query_alternatives(
    gateway: Gateway, pair: FunctionSolutionPair, *, attempt: int
) -> list[str]:
    request = ProviderRequest(
        capability=Capability.VISION,
        prompt=render_template(
            "alternatives", N="2", FUNCTION=pair.function, SOLUTION=pair.solution
        ),
        params={
            "task": "alternatives",
            "function": pair.function,
            "solution": pair.solution,
            "n": "2",
            "attempt": str(attempt),
        },
    )
    response = gateway.invoke(request)
    return _parse_alternatives(response.text or "", pair.solution, needed=2)


def build_chart(
    gateway: Gateway,
    mapping: MappingResult,
    pairs: Sequence[FunctionSolutionPair],
) -> FunctionChart:
    """Chart every mapped function with exactly two distinct alternatives.

    The provider is queried once, re-queried once on a collision with the
    current solution or a duplicate, then deterministic placeholders fill
    whatever is still missing so the chart shape never degrades.
    """
    by_function = {pair.function: pair for pair in pairs}
    missing = [f for f in mapping.assignments if f not in by_function]
    if missing:
        raise PreconditionError(f"mapping covers unknown functions: {missing}")
    components: dict[str, list[ChartEntry]] = {}
    for pair in pairs:
        component = mapping.assignments.get(pair.function)
        if component is None:
            continue
        alternatives = _query_alternatives(gateway, pair, attempt=0)
        if len(alternatives) < 2:
            retry = _query_alternatives(gateway, pair, attempt=1)
            for candidate in retry:
                if len(alternatives) >= 2:
                    break
                if all(candidate.lower() != a.lower() for a in alternatives):
                    alternatives.append(candidate)
        placeholders = (
            f"variant A of {pair.solution}",
            f"variant B of {pair.solution}",
        )
        for placeholder in placeholders:
            if len(alternatives) >= 2:
                break
            if all(placeholder.lower() != a.lower() for a in alternatives):
                alternatives.append(placeholder)
        entry = ChartEntry(
            function=pair.function,
            current=pair.solution,
            alternatives=(alternatives[0], alternatives[1]),
        )
        components.setdefault(component, []).append(entry)
    return FunctionChart(
        components={k: tuple(v) for k, v in components.items()},
        unmapped=mapping.unmapped,
    )


@dataclass(frozen=True)
class AccuracyReport:
    """Table-style mapping accuracy over repeated trials."""

    per_function: dict[str, float]
    overall: float
    trials: int

    def as_dict(self) -> dict:
        return {
            "per_function": dict(self.per_function),
            "overall": self.overall,
            "trials": self.trials,
        }


def mapping_accuracy(
    trial_results: Sequence[MappingResult], gold: dict[str, str]
) -> AccuracyReport:
    """Percent of trials mapping each function to its gold component.

    Unmapped counts as incorrect. Overall is the mean of the per-function
    percentages (every function sees the same trial count).
    """
    if not gold:
        raise PreconditionError("gold mapping must not be empty")
    if not trial_results:
        raise PreconditionError("need at least one trial")
    per_function: dict[str, float] = {}
    for function, expected in gold.items():
        correct = sum(
            1
            for result in trial_results
            if result.assignments.get(function) == expected
        )
        per_function[function] = 100.0 * correct / len(trial_results)
    overall = sum(per_function.values()) / len(per_function)
    return AccuracyReport(
        per_function=per_function, overall=overall, trials=len(trial_results)
    )


def palette_min_distance(colors: Iterable[Rgb] | None = None) -> float:
    """Smallest pairwise L2 distance; the invariant floor is 120."""
    values = [np.array(c, dtype=np.float64) for c in (colors or [rgb for _, rgb in PALETTE])]
    best = float("inf")
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            best = min(best, float(np.linalg.norm(values[i] - values[j])))
    return best
