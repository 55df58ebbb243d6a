"""Edit transactions: masks, visibility, both edit paths, chart folding."""

from __future__ import annotations

from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import Generator, PCG64

from conceptstudio.editor import (
    EditKind,
    EditOutcome,
    EditStatus,
    EditTransaction,
    INPAINT_MARGIN,
    check_visibility,
    edit_by_recommendation,
    edit_by_sketch,
    edit_prompt,
    make_inpaint_mask,
    parse_visibility,
    replay_chart,
    sketch_canvas,
    update_chart_after_edit,
)
from conceptstudio.errors import ContentPolicyRejection, PreconditionError
from conceptstudio.mapping import build_overlay, build_chart, map_functions
from conceptstudio.model.documents import FunctionSolutionPair
from conceptstudio.model.raster import RasterImage, Stroke
from conceptstudio.providers.base import Capability
from conceptstudio.providers.gateway import Gateway, GatewayConfig
from conceptstudio.providers.mock import MockScript
from conceptstudio.providers.procedural import EXTRACTED_PAIRS, draw_category
from conceptstudio.segmentation.inference import regions
from conceptstudio.segmentation.schema import LabelMask, schema_for


def mock_gateway(script: MockScript | None = None) -> Gateway:
    return Gateway(GatewayConfig(mode="mock", backoff_base_s=0.0), script=script)


def build_setup(category: str, seed: int = 4, script: MockScript | None = None):
    gateway = mock_gateway(script)
    rng = Generator(PCG64(seed))
    pixels, labels = draw_category(category, rng)
    image = RasterImage.from_array(pixels)
    schema = schema_for(category)
    region_list = regions(LabelMask.from_array(labels), schema)
    overlay, legend = build_overlay(image, region_list)
    pairs = [
        FunctionSolutionPair(function=f, solution=s)
        for f, s in EXTRACTED_PAIRS[category]
    ]
    mapping = map_functions(gateway, overlay, legend, pairs, category=category)
    chart = build_chart(gateway, mapping, pairs)
    return SimpleNamespace(
        gateway=gateway,
        image=image,
        regions={r.class_label: r for r in region_list},
        chart=chart,
    )


@pytest.fixture(scope="module")
def car():
    return build_setup("car")


@pytest.fixture(scope="module")
def robot_dog():
    return build_setup("robot_dog")


# ---------------------------------------------------------------------------
# Inpaint mask dilation
# ---------------------------------------------------------------------------


def oracle_dilate(mask: np.ndarray, margin: int) -> np.ndarray:
    h, w = mask.shape
    out = np.zeros_like(mask)
    for r in range(h):
        for c in range(w):
            r0, r1 = max(0, r - margin), min(h, r + margin + 1)
            c0, c1 = max(0, c - margin), min(w, c + margin + 1)
            out[r, c] = mask[r0:r1, c0:c1].any()
    return out


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    margin=st.integers(min_value=0, max_value=6),
)
def test_make_inpaint_mask_matches_bruteforce_oracle(seed, margin):
    rng = Generator(PCG64(seed))
    mask = rng.random((24, 24)) < 0.08
    mask[12, 12] = True  # never empty
    assert np.array_equal(
        make_inpaint_mask(mask, margin), oracle_dilate(mask, margin)
    )


def test_make_inpaint_mask_margin_zero_is_identity():
    mask = np.zeros((16, 16), dtype=bool)
    mask[4:8, 4:8] = True
    out = make_inpaint_mask(mask, 0)
    assert np.array_equal(out, mask)
    assert out is not mask


def test_make_inpaint_mask_clips_at_edges():
    mask = np.zeros((16, 16), dtype=bool)
    mask[0, 0] = True
    out = make_inpaint_mask(mask, 3)
    assert out.shape == (16, 16)
    assert out[:4, :4].all()
    assert not out[:, 4:].any() and not out[4:, :].any()


def test_make_inpaint_mask_default_margin():
    assert INPAINT_MARGIN == 8
    mask = np.zeros((64, 64), dtype=bool)
    mask[30:34, 30:34] = True
    grown = make_inpaint_mask(mask)
    assert grown[22, 22] and grown[41, 41]
    assert not grown[21, 30] and not grown[42, 30]


def test_make_inpaint_mask_rejects_bad_input():
    good = np.ones((4, 4), dtype=bool)
    with pytest.raises(PreconditionError):
        make_inpaint_mask(good, -1)
    with pytest.raises(PreconditionError):
        make_inpaint_mask(np.zeros((4, 4), dtype=bool))
    with pytest.raises(PreconditionError):
        make_inpaint_mask(np.ones((4, 4), dtype=np.uint8))


# ---------------------------------------------------------------------------
# Visibility parsing
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text,expected",
    [
        ("yes", True),
        ("Yes - the wheel is visible.", True),
        ("  YES", True),
        ("no", False),
        ("No, internal component.", False),
        ("no - this change is internal", False),
        ("maybe", True),
        ("", True),
        ("It depends entirely on the angle.", True),
    ],
)
def test_parse_visibility(text, expected):
    assert parse_visibility(text) is expected


def test_check_visibility_uses_mock_gold(car, robot_dog):
    assert check_visibility(
        car.gateway,
        car.image,
        category="car",
        function="wheel size",
        solution="19 inches",
    )
    assert not check_visibility(
        robot_dog.gateway,
        robot_dog.image,
        category="robot_dog",
        function="battery chemistry",
        solution="lithium",
    )


# ---------------------------------------------------------------------------
# Transaction invariants
# ---------------------------------------------------------------------------


def txn(**overrides) -> EditTransaction:
    base = dict(
        edit_id="e1",
        kind=EditKind.RECOMMENDATION,
        component="wheel",
        function="wheel size",
        from_solution="19 inches",
        to_solution="20 inches",
    )
    base.update(overrides)
    return EditTransaction(**base)


def test_transaction_applied_requires_hashes():
    with pytest.raises(PreconditionError):
        txn(status=EditStatus.APPLIED, visible=True)
    txn(status=EditStatus.APPLIED, visible=True, mask_hash="m", result_hash="r")


def test_transaction_metadata_only_shape():
    with pytest.raises(PreconditionError):
        txn(status=EditStatus.METADATA_ONLY, visible=True)
    with pytest.raises(PreconditionError):
        txn(status=EditStatus.METADATA_ONLY, visible=False, result_hash="r")
    txn(status=EditStatus.METADATA_ONLY, visible=False)


def test_transaction_failed_requires_error():
    with pytest.raises(PreconditionError):
        txn(status=EditStatus.FAILED)
    txn(status=EditStatus.FAILED, error="boom")


def test_transaction_round_trip():
    t = txn(status=EditStatus.APPLIED, visible=True, mask_hash="m", result_hash="r")
    assert EditTransaction.from_dict(t.to_dict()) == t


def test_outcome_image_matches_status():
    applied = txn(
        status=EditStatus.APPLIED, visible=True, mask_hash="m", result_hash="bad"
    )
    with pytest.raises(PreconditionError):
        EditOutcome(applied)  # applied without an image
    with pytest.raises(PreconditionError):
        EditOutcome(applied, RasterImage.blank(4, 4))  # hash mismatch


# ---------------------------------------------------------------------------
# Recommendation edits
# ---------------------------------------------------------------------------


def test_edit_prompt_folds_shared_function_words():
    prompt = edit_prompt("wheel size", "19 inches", "20 inches")
    assert prompt == "change wheel size from 19 inches to 20 inches"


def test_recommendation_edit_applies_inside_mask_only(car):
    region = car.regions["wheel"]
    outcome = edit_by_recommendation(
        car.gateway,
        car.image,
        region,
        car.chart,
        "wheel size",
        "20 inches",
        category="car",
    )
    t = outcome.transaction
    assert t.status is EditStatus.APPLIED
    assert t.visible is True
    assert t.from_solution == "19 inches"
    assert t.to_solution == "20 inches"
    assert outcome.image is not None
    assert outcome.image.content_hash == t.result_hash
    assert outcome.image.content_hash != car.image.content_hash

    mask = make_inpaint_mask(region.mask)
    before = car.image.to_array()
    after = outcome.image.to_array()
    assert np.array_equal(after[~mask], before[~mask])
    assert not np.array_equal(after[mask], before[mask])


def test_recommendation_edit_is_deterministic(car):
    region = car.regions["wheel"]
    first = edit_by_recommendation(
        car.gateway, car.image, region, car.chart,
        "wheel size", "20 inches", category="car", edit_id="same",
    )
    second = edit_by_recommendation(
        car.gateway, car.image, region, car.chart,
        "wheel size", "20 inches", category="car", edit_id="same",
    )
    assert first.transaction == second.transaction
    assert first.image.content_hash == second.image.content_hash


def test_recommendation_edit_invisible_function_is_metadata_only(robot_dog):
    region = robot_dog.regions["body"]
    _, entry = robot_dog.chart.entry_for("battery chemistry")
    outcome = edit_by_recommendation(
        robot_dog.gateway,
        robot_dog.image,
        region,
        robot_dog.chart,
        "battery chemistry",
        entry.alternatives[0],
        category="robot_dog",
    )
    t = outcome.transaction
    assert t.status is EditStatus.METADATA_ONLY
    assert t.visible is False
    assert outcome.image is None
    assert t.result_hash is None and t.result_version is None


def test_recommendation_edit_rejects_unlisted_solution(car):
    with pytest.raises(PreconditionError):
        edit_by_recommendation(
            car.gateway, car.image, car.regions["wheel"], car.chart,
            "wheel size", "21 inches", category="car",
        )


def test_recommendation_edit_rejects_component_mismatch(car):
    with pytest.raises(PreconditionError):
        edit_by_recommendation(
            car.gateway, car.image, car.regions["body"], car.chart,
            "wheel size", "20 inches", category="car",
        )


def test_recommendation_edit_provider_failure_is_failed_status(car):
    def rejecting(request, rng):
        raise ContentPolicyRejection("prompt rejected")

    script = MockScript().with_fixture(Capability.INPAINT, r".", rejecting)
    setup = build_setup("car", script=script)
    outcome = edit_by_recommendation(
        setup.gateway, setup.image, setup.regions["wheel"], setup.chart,
        "wheel size", "20 inches", category="car",
    )
    t = outcome.transaction
    assert t.status is EditStatus.FAILED
    assert outcome.image is None
    assert "rejected" in t.error


# ---------------------------------------------------------------------------
# Sketch edits
# ---------------------------------------------------------------------------


def wheel_strokes() -> list[Stroke]:
    return [
        Stroke(
            points=((120.0, 380.0, 0.0), (200.0, 380.0, 50.0), (200.0, 430.0, 90.0)),
            width=4.0,
            color=(0, 0, 0),
        )
    ]


def test_sketch_canvas_whites_region_and_draws_strokes(car):
    region = car.regions["wheel"]
    canvas = sketch_canvas(car.image, region, wheel_strokes())
    pixels = canvas.to_array()
    base = car.image.to_array()
    stroke_ink = np.all(pixels[:, :, :3] == 0, axis=-1)
    whited = region.mask & ~stroke_ink
    assert np.all(pixels[whited] == 255)
    untouched = ~region.mask & ~stroke_ink
    assert np.array_equal(pixels[untouched], base[untouched])
    assert stroke_ink.any()


def test_sketch_canvas_requires_strokes(car):
    with pytest.raises(PreconditionError):
        sketch_canvas(car.image, car.regions["wheel"], [])


def test_sketch_edit_promotes_refined_description(car):
    region = car.regions["wheel"]
    outcome = edit_by_sketch(
        car.gateway,
        car.image,
        region,
        car.chart,
        "wheel size",
        wheel_strokes(),
        "a chunky off-road wheel",
        category="car",
    )
    t = outcome.transaction
    assert t.status is EditStatus.APPLIED
    assert t.kind is EditKind.SKETCH
    assert t.to_solution == "chunky off-road wheel"
    assert outcome.image is not None

    mask = make_inpaint_mask(region.mask)
    assert np.array_equal(
        outcome.image.to_array()[~mask], car.image.to_array()[~mask]
    )

    updated = update_chart_after_edit(car.chart, t)
    _, entry = updated.entry_for("wheel size")
    assert entry.current == "chunky off-road wheel"
    assert entry.alternatives[0] == "19 inches"


# ---------------------------------------------------------------------------
# Chart folding and replay
# ---------------------------------------------------------------------------


def applied_swap(chart, function: str, choice: str) -> EditTransaction:
    component, entry = chart.entry_for(function)
    return EditTransaction(
        edit_id=f"swap-{function}-{choice}",
        kind=EditKind.RECOMMENDATION,
        component=component,
        function=function,
        from_solution=entry.current,
        to_solution=choice,
        status=EditStatus.METADATA_ONLY,
        visible=False,
    )


def test_update_chart_swap_is_involutive(car):
    t = applied_swap(car.chart, "wheel size", "20 inches")
    once = update_chart_after_edit(car.chart, t)
    _, entry = once.entry_for("wheel size")
    assert entry.current == "20 inches"
    assert "19 inches" in entry.alternatives

    back = applied_swap(once, "wheel size", "19 inches")
    restored = update_chart_after_edit(once, back)
    assert restored.to_dict() == car.chart.to_dict()


def test_update_chart_rejects_stale_from_solution(car):
    t = applied_swap(car.chart, "wheel size", "20 inches")
    updated = update_chart_after_edit(car.chart, t)
    with pytest.raises(PreconditionError):
        update_chart_after_edit(updated, t)  # current moved on


def test_update_chart_skips_pending_and_failed(car):
    pending = txn()
    failed = txn(status=EditStatus.FAILED, error="x")
    assert update_chart_after_edit(car.chart, pending) is car.chart
    assert update_chart_after_edit(car.chart, failed) is car.chart


def test_chart_shape_survives_twenty_random_swaps(car):
    rng = Generator(PCG64(123))
    chart = car.chart
    functions = sorted(
        entry.function
        for entries in chart.components.values()
        for entry in entries
    )
    solution_sets = {
        f: frozenset([chart.entry_for(f)[1].current, *chart.entry_for(f)[1].alternatives])
        for f in functions
    }
    log = []
    for _ in range(20):
        function = functions[rng.integers(0, len(functions))]
        _, entry = chart.entry_for(function)
        choice = entry.alternatives[rng.integers(0, len(entry.alternatives))]
        t = applied_swap(chart, function, choice)
        log.append(t)
        chart = update_chart_after_edit(chart, t)

        assert chart.entry_count == car.chart.entry_count
        assert chart.unmapped == car.chart.unmapped
        for f in functions:
            _, e = chart.entry_for(f)
            assert frozenset([e.current, *e.alternatives]) == solution_sets[f]
            assert len(e.alternatives) == 2

    assert replay_chart(car.chart, log).to_dict() == chart.to_dict()


def test_replay_reproduces_final_chart_through_mixed_log(car):
    sketch = EditTransaction(
        edit_id="sk",
        kind=EditKind.SKETCH,
        component="wheel",
        function="wheel size",
        from_solution="19 inches",
        to_solution="chunky off-road wheel",
        status=EditStatus.APPLIED,
        visible=True,
        mask_hash="m",
        result_hash="r",
    )
    follow_up_chart = update_chart_after_edit(car.chart, sketch)
    _, entry = follow_up_chart.entry_for("wheel size")
    swap = applied_swap(follow_up_chart, "wheel size", entry.alternatives[1])
    failed = txn(status=EditStatus.FAILED, error="x")
    final = replay_chart(car.chart, [sketch, failed, swap])
    _, final_entry = final.entry_for("wheel size")
    assert final_entry.current == entry.alternatives[1]
    assert "chunky off-road wheel" in final_entry.alternatives
