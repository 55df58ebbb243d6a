"""Component-level edits on a generated concept image.

Two edit paths share one transaction record. A recommendation edit swaps a
charted function to one of its listed alternative solutions; a sketch edit
whites out the component region, overlays the designer's replacement strokes,
and turns the refined description into the new solution. Both paths repaint
only inside a dilated copy of the component mask, so pixels outside that mask
are byte-identical before and after an applied edit.
"""

from __future__ import annotations

import hashlib
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from typing import Final, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from conceptstudio.errors import PreconditionError, ProviderError
from conceptstudio.generation import refine
from conceptstudio.mapping import ChartEntry, ComponentRegion, FunctionChart
from conceptstudio.model.raster import RasterImage, Stroke, draw_strokes
from conceptstudio.providers.base import Capability, ProviderRequest
from conceptstudio.providers.gateway import Gateway
from conceptstudio.providers.templates import render_template
from conceptstudio.segmentation.inference import mask_to_bytes

INPAINT_MARGIN: Final = 8

WHITE: Final = (255, 255, 255, 255)


class EditKind(str, Enum):
    RECOMMENDATION = "recommendation"
    SKETCH = "sketch"


class EditStatus(str, Enum):
    PENDING = "pending"
    APPLIED = "applied"
    METADATA_ONLY = "metadata_only"
    FAILED = "failed"


def make_inpaint_mask(
    region_mask: NDArray[np.bool_], margin: int = INPAINT_MARGIN
) -> NDArray[np.bool_]:
    """Dilate the component mask by a square margin, clipped at the edges.

    The margin gives the repaint room to blend the new component into its
    surroundings. margin=0 returns an identical copy.
    """
    if region_mask.dtype != np.bool_ or region_mask.ndim != 2:
        raise PreconditionError("region mask must be a 2-D boolean array")
    if margin < 0:
        raise PreconditionError(f"mask margin must be >= 0, got {margin}")
    if not region_mask.any():
        raise PreconditionError("region mask is empty")
    if margin == 0:
        return region_mask.copy()
    grown = ndimage.maximum_filter(
        region_mask.astype(np.uint8), size=2 * margin + 1, mode="constant", cval=0
    )
    return grown != 0


def parse_visibility(text: str) -> bool:
    """Yes/no prefix parse; anything unrecognized counts as visible.

    Failing open keeps an oddly phrased answer from silently downgrading a
    real image edit to a chart-only one.
    """
    token = text.strip().lower()
    if token.startswith("yes"):
        return True
    if token.startswith("no"):
        return False
    return True


@dataclass(frozen=True)
class EditTransaction:
    """One edit attempt, complete enough to replay the chart from a log."""

    edit_id: str
    kind: EditKind
    component: str
    function: str
    from_solution: str
    to_solution: str
    status: EditStatus = EditStatus.PENDING
    visible: bool | None = None
    mask_hash: str | None = None
    result_hash: str | None = None
    result_version: int | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if self.status is EditStatus.APPLIED:
            if self.visible is False:
                raise PreconditionError("applied edits must be visible")
            if self.mask_hash is None or self.result_hash is None:
                raise PreconditionError(
                    "applied edits carry a mask hash and a result hash"
                )
        if self.status is EditStatus.METADATA_ONLY:
            if self.visible is not False:
                raise PreconditionError(
                    "metadata-only edits arise from invisible functions"
                )
            if self.result_hash is not None or self.result_version is not None:
                raise PreconditionError("metadata-only edits leave the image alone")
        if self.status is EditStatus.FAILED and not self.error:
            raise PreconditionError("failed edits carry an error message")

    def to_dict(self) -> dict:
        return {
            "edit_id": self.edit_id,
            "kind": self.kind.value,
            "component": self.component,
            "function": self.function,
            "from_solution": self.from_solution,
            "to_solution": self.to_solution,
            "status": self.status.value,
            "visible": self.visible,
            "mask_hash": self.mask_hash,
            "result_hash": self.result_hash,
            "result_version": self.result_version,
            "error": self.error,
        }

    @staticmethod
    def from_dict(data: dict) -> "EditTransaction":
        payload = dict(data)
        payload["kind"] = EditKind(payload["kind"])
        payload["status"] = EditStatus(payload["status"])
        return EditTransaction(**payload)


@dataclass(frozen=True)
class EditOutcome:
    """Transaction record plus the repainted image when one was produced."""

    transaction: EditTransaction
    image: RasterImage | None = None

    def __post_init__(self) -> None:
        applied = self.transaction.status is EditStatus.APPLIED
        if applied != (self.image is not None):
            raise PreconditionError("an image accompanies exactly the applied edits")
        if applied and self.image.content_hash != self.transaction.result_hash:
            raise PreconditionError("result hash does not match the image")


def check_visibility(
    gateway: Gateway,
    image: RasterImage,
    *,
    category: str,
    function: str,
    solution: str,
) -> bool:
    """Ask whether the function shows up in the image at all."""
    request = ProviderRequest(
        capability=Capability.VISION,
        prompt=render_template("visibility"),
        images=(image,),
        params={
            "task": "visibility",
            "system": render_template(
                "visibility_context", FUNCTION=function, SOLUTION=solution
            ),
            "category": category,
            "function": function,
            "solution": solution,
        },
    )
    return parse_visibility(gateway.invoke(request).text)


def edit_prompt(function: str, current: str, chosen: str) -> str:
    """Phrase the swap around the shared template, folding the function name in."""
    return render_template(
        "edit_function",
        SOLUTION_A=f"{function} {current}",
        SOLUTION_B=f"{function} {chosen}",
    )


def _composite_outside(
    base: RasterImage, repainted: RasterImage, mask: NDArray[np.bool_]
) -> RasterImage:
    """Clamp the repaint to the mask: outside pixels come from the base."""
    if (repainted.width, repainted.height) != (base.width, base.height):
        raise ProviderError(
            f"repaint returned {repainted.width}x{repainted.height} "
            f"for a {base.width}x{base.height} image"
        )
    merged = base.to_array()
    merged[mask] = repainted.to_array()[mask]
    return RasterImage.from_array(merged)


def _inpaint(
    gateway: Gateway,
    image: RasterImage,
    mask: NDArray[np.bool_],
    prompt: str,
    params: dict,
) -> RasterImage:
    mask_bytes = mask_to_bytes(mask)
    request = ProviderRequest(
        capability=Capability.INPAINT,
        prompt=prompt,
        images=(image,),
        mask=mask_bytes,
        params=params,
    )
    response = gateway.invoke(request)
    if not response.images:
        raise ProviderError("inpaint returned no image")
    return _composite_outside(image, response.images[0], mask)


def _entry_for_edit(
    chart: FunctionChart, region: ComponentRegion, function: str
) -> tuple[str, ChartEntry]:
    component, entry = chart.entry_for(function)
    if component != region.class_label:
        raise PreconditionError(
            f"function {function!r} belongs to component {component!r}, "
            f"not {region.class_label!r}"
        )
    return component, entry


def edit_by_recommendation(
    gateway: Gateway,
    image: RasterImage,
    region: ComponentRegion,
    chart: FunctionChart,
    function: str,
    chosen: str,
    *,
    category: str,
    edit_id: str | None = None,
    margin: int = INPAINT_MARGIN,
) -> EditOutcome:
    """Swap a charted function to one of its alternatives.

    Invisible functions update only the chart (metadata-only outcome); the
    image is repainted inside the dilated component mask otherwise. Provider
    failures come back as a failed transaction, not an exception.
    """
    component, entry = _entry_for_edit(chart, region, function)
    if chosen not in entry.alternatives:
        raise PreconditionError(
            f"{chosen!r} is not an offered alternative for {function!r}"
        )
    base = EditTransaction(
        edit_id=edit_id or uuid.uuid4().hex,
        kind=EditKind.RECOMMENDATION,
        component=component,
        function=function,
        from_solution=entry.current,
        to_solution=chosen,
    )

    try:
        visible = check_visibility(
            gateway, image, category=category, function=function, solution=entry.current
        )
    except ProviderError as exc:
        return EditOutcome(
            replace(base, status=EditStatus.FAILED, error=f"visibility check: {exc}")
        )
    if not visible:
        return EditOutcome(
            replace(base, status=EditStatus.METADATA_ONLY, visible=False)
        )

    mask = make_inpaint_mask(region.mask, margin)
    try:
        repainted = _inpaint(
            gateway,
            image,
            mask,
            edit_prompt(function, entry.current, chosen),
            {"category": category, "component": component, "function": function},
        )
    except ProviderError as exc:
        return EditOutcome(
            replace(base, status=EditStatus.FAILED, visible=True, error=str(exc))
        )
    return EditOutcome(
        replace(
            base,
            status=EditStatus.APPLIED,
            visible=True,
            mask_hash=hashlib.sha256(mask_to_bytes(mask)).hexdigest(),
            result_hash=repainted.content_hash,
        ),
        repainted,
    )


def sketch_canvas(
    image: RasterImage, region: ComponentRegion, strokes: Sequence[Stroke]
) -> RasterImage:
    """White out the component and draw the replacement strokes over it."""
    if not strokes:
        raise PreconditionError("a sketch edit needs at least one stroke")
    pixels = image.to_array()
    pixels[region.mask] = WHITE
    draw_strokes(pixels, list(strokes))
    return RasterImage.from_array(pixels)


def edit_by_sketch(
    gateway: Gateway,
    image: RasterImage,
    region: ComponentRegion,
    chart: FunctionChart,
    function: str,
    strokes: Sequence[Stroke],
    transcript: str,
    *,
    category: str,
    edit_id: str | None = None,
    margin: int = INPAINT_MARGIN,
) -> EditOutcome:
    """Replace a component by re-sketching it in place.

    The whited-out region plus strokes goes through the same refinement step
    as a fresh sketch; the refined description becomes both the repaint
    prompt and the function's new current solution.
    """
    component, entry = _entry_for_edit(chart, region, function)
    base = EditTransaction(
        edit_id=edit_id or uuid.uuid4().hex,
        kind=EditKind.SKETCH,
        component=component,
        function=function,
        from_solution=entry.current,
        to_solution="",
    )

    canvas = sketch_canvas(image, region, strokes)
    try:
        refinement = refine(gateway, canvas, transcript)
    except ProviderError as exc:
        return EditOutcome(
            replace(base, status=EditStatus.FAILED, error=f"refinement: {exc}")
        )
    base = replace(base, to_solution=refinement.refined_description)

    mask = make_inpaint_mask(region.mask, margin)
    try:
        repainted = _inpaint(
            gateway,
            image,
            mask,
            refinement.refined_description,
            {"category": category, "component": component, "function": function},
        )
    except ProviderError as exc:
        return EditOutcome(
            replace(base, status=EditStatus.FAILED, visible=True, error=str(exc))
        )
    return EditOutcome(
        replace(
            base,
            status=EditStatus.APPLIED,
            visible=True,
            mask_hash=hashlib.sha256(mask_to_bytes(mask)).hexdigest(),
            result_hash=repainted.content_hash,
        ),
        repainted,
    )


def _sketch_alternatives(entry: ChartEntry, new_current: str) -> tuple[str, str]:
    """Old current leads the alternatives; collisions fall back to variants."""
    seen = {new_current.lower()}
    kept: list[str] = []
    for candidate in (entry.current, *entry.alternatives):
        if candidate.lower() in seen:
            continue
        seen.add(candidate.lower())
        kept.append(candidate)
        if len(kept) == 2:
            break
    for letter in ("A", "B"):
        if len(kept) == 2:
            break
        filler = f"variant {letter} of {new_current}"
        if filler.lower() not in seen:
            kept.append(filler)
            seen.add(filler.lower())
    return kept[0], kept[1]


def update_chart_after_edit(
    chart: FunctionChart, transaction: EditTransaction
) -> FunctionChart:
    """Fold one finished transaction into the chart.

    Recommendation edits swap the chosen alternative with the current
    solution, so applying the inverse transaction restores the original
    chart. Sketch edits promote the refined description to current and push
    the former current to the head of the alternatives. Pending and failed
    transactions leave the chart untouched.
    """
    if transaction.status in (EditStatus.PENDING, EditStatus.FAILED):
        return chart
    component, entry = chart.entry_for(transaction.function)
    if component != transaction.component:
        raise PreconditionError(
            f"transaction names component {transaction.component!r} but the "
            f"chart holds {transaction.function!r} under {component!r}"
        )
    if entry.current != transaction.from_solution:
        raise PreconditionError(
            f"chart shows {entry.current!r} for {transaction.function!r}, "
            f"transaction expected {transaction.from_solution!r}"
        )

    if transaction.kind is EditKind.RECOMMENDATION:
        if transaction.to_solution not in entry.alternatives:
            raise PreconditionError(
                f"{transaction.to_solution!r} is not among the alternatives "
                f"for {transaction.function!r}"
            )
        alternatives = tuple(
            transaction.from_solution if option == transaction.to_solution else option
            for option in entry.alternatives
        )
    else:
        alternatives = _sketch_alternatives(entry, transaction.to_solution)

    updated = ChartEntry(
        function=entry.function,
        current=transaction.to_solution,
        alternatives=alternatives,
    )
    components = {
        name: tuple(updated if e.function == entry.function else e for e in entries)
        for name, entries in chart.components.items()
    }
    return FunctionChart(components=components, unmapped=chart.unmapped)


def replay_chart(
    chart: FunctionChart, transactions: Iterable[EditTransaction]
) -> FunctionChart:
    """Reapply a transaction log to a starting chart."""
    for transaction in transactions:
        chart = update_chart_after_edit(chart, transaction)
    return chart
