"""Rasterizer correctness against an independent scalar oracle.

The oracle below rasterizes strokes with plain Python loops and the same
pixel-center geometry the production code vectorizes. Both must agree on
every pixel byte; the expressions are kept structurally identical so the
comparison is exact, not approximate.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptstudio.errors import EmptySketch, PreconditionError
from conceptstudio.model.raster import (
    RasterImage,
    SketchDocument,
    Stroke,
    rasterize,
)


def oracle_rasterize(doc: SketchDocument) -> np.ndarray:
    """Scanline reference: per-pixel distance test, pure Python."""
    width, height = doc.canvas
    out = np.full((height, width, 4), 255, dtype=np.uint8)
    for stroke in doc.strokes:
        radius = stroke.width / 2.0
        pts = [(x, y) for x, y, _ in stroke.points]
        segments = list(zip(pts, pts[1:])) or [(pts[0], pts[0])]
        for (ax, ay), (bx, by) in segments:
            lo_x = max(0, int(math.floor(min(ax, bx) - radius - 1)))
            hi_x = min(width, int(math.ceil(max(ax, bx) + radius + 1)))
            lo_y = max(0, int(math.floor(min(ay, by) - radius - 1)))
            hi_y = min(height, int(math.ceil(max(ay, by) + radius + 1)))
            vx = bx - ax
            vy = by - ay
            length_sq = vx * vx + vy * vy
            for row in range(lo_y, hi_y):
                py = row + 0.5
                for col in range(lo_x, hi_x):
                    px = col + 0.5
                    if length_sq > 0.0:
                        t = ((px - ax) * vx + (py - ay) * vy) / length_sq
                        t = min(1.0, max(0.0, t))
                    else:
                        t = 0.0
                    cx = ax + t * vx
                    cy = ay + t * vy
                    dist_sq = (px - cx) * (px - cx) + (py - cy) * (py - cy)
                    if dist_sq <= radius * radius:
                        out[row, col, 0] = stroke.color[0]
                        out[row, col, 1] = stroke.color[1]
                        out[row, col, 2] = stroke.color[2]
    return out


def make_stroke(points, width=6.0, color=(20, 30, 40)):
    timed = tuple((float(x), float(y), float(i)) for i, (x, y) in enumerate(points))
    return Stroke(points=timed, width=width, color=color)


def test_single_diagonal_stroke_matches_oracle():
    doc = SketchDocument(
        strokes=(make_stroke([(5.2, 7.9), (50.7, 38.1)]),), canvas=(64, 64)
    )
    assert np.array_equal(rasterize(doc).to_array(), oracle_rasterize(doc))


def test_multi_stroke_draw_order_matches_oracle():
    doc = SketchDocument(
        strokes=(
            make_stroke([(10, 10), (54, 10), (54, 54)], width=9, color=(200, 0, 0)),
            make_stroke([(10, 54), (54, 10)], width=5, color=(0, 0, 250)),
            make_stroke([(32, 5), (32, 60)], width=3, color=(0, 120, 0)),
        ),
        canvas=(64, 64),
    )
    assert np.array_equal(rasterize(doc).to_array(), oracle_rasterize(doc))


def test_dot_stroke_is_a_disc():
    # A zero-length segment degenerates to a round cap at the point.
    doc = SketchDocument(
        strokes=(make_stroke([(16.0, 16.0), (16.0, 16.0)], width=8),), canvas=(32, 32)
    )
    rendered = rasterize(doc).to_array()
    assert np.array_equal(rendered, oracle_rasterize(doc))
    painted = int((rendered[:, :, 0] != 255).sum())
    # Area of a radius-4 disc sampled at pixel centers is close to pi * 16.
    assert 40 <= painted <= 60


def test_stroke_clipped_at_canvas_edge_matches_oracle():
    doc = SketchDocument(
        strokes=(make_stroke([(0.0, 0.0), (31.0, 2.0)], width=10),), canvas=(32, 32)
    )
    assert np.array_equal(rasterize(doc).to_array(), oracle_rasterize(doc))


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(min_value=0.0, max_value=48.0),
            st.floats(min_value=0.0, max_value=48.0),
        ),
        min_size=2,
        max_size=6,
    ),
    st.floats(min_value=0.5, max_value=12.0),
)
def test_random_polylines_match_oracle(points, width):
    doc = SketchDocument(strokes=(make_stroke(points, width=width),), canvas=(48, 48))
    assert np.array_equal(rasterize(doc).to_array(), oracle_rasterize(doc))


def test_rasterize_is_deterministic_across_calls():
    doc = SketchDocument(
        strokes=(make_stroke([(3, 4), (40, 44), (60, 10)]),), canvas=(64, 64)
    )
    assert rasterize(doc).content_hash == rasterize(doc).content_hash


def test_empty_sketch_rejected():
    with pytest.raises(EmptySketch):
        rasterize(SketchDocument(strokes=(), canvas=(64, 64)))


def test_stroke_validation():
    with pytest.raises(PreconditionError):
        Stroke(points=((1.0, 1.0, 0.0),), width=2.0, color=(0, 0, 0))
    with pytest.raises(PreconditionError):
        make_stroke([(0, 0), (1, 1)], width=0.0)
    with pytest.raises(PreconditionError):
        Stroke(
            points=((0.0, 0.0, 5.0), (1.0, 1.0, 4.0)), width=2.0, color=(0, 0, 0)
        )


def test_out_of_canvas_stroke_rejected():
    with pytest.raises(PreconditionError):
        SketchDocument(strokes=(make_stroke([(0, 0), (2000, 10)]),), canvas=(64, 64))


def test_stroke_round_trip():
    stroke = make_stroke([(1.5, 2.5), (9.25, 4.0)], width=3.5, color=(10, 250, 30))
    assert Stroke.from_dict(stroke.to_dict()) == stroke


def test_sketch_document_round_trip():
    doc = SketchDocument(
        strokes=(make_stroke([(1, 2), (3, 4)]), make_stroke([(5, 6), (7, 8)])),
        canvas=(128, 96),
    )
    assert SketchDocument.from_dict(doc.to_dict()) == doc


def test_content_hash_is_sha256_of_raw_rgba():
    import hashlib

    image = RasterImage.blank(4, 4)
    assert image.content_hash == hashlib.sha256(image.pixels).hexdigest()
    assert image.content_hash == image.content_hash.lower()
    assert len(image.content_hash) == 64


def test_png_round_trip_preserves_pixels():
    doc = SketchDocument(strokes=(make_stroke([(2, 2), (20, 20)]),), canvas=(24, 24))
    image = rasterize(doc)
    again = RasterImage.from_png_bytes(image.to_png_bytes())
    assert again.content_hash == image.content_hash
