"""Raster images and the deterministic stroke rasterizer.

The rasterizer is the reference renderer for sketches: white background,
round-capped polylines, draw order, and no anti-aliasing. Determinism is a
hard requirement (identical input must hash identically across processes),
which is why coverage is a pure distance test per pixel center rather than
a library call with its own sampling rules.

Pixel convention: pixel (row, col) covers the unit square with center
(col + 0.5, row + 0.5) in canvas coordinates. A pixel is painted by a stroke
iff the distance from its center to the stroke's polyline is <= width / 2.
Round caps and joins fall out of the distance test for free.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from conceptstudio.errors import EmptySketch, PreconditionError

WHITE = (255, 255, 255)


@dataclass(frozen=True)
class RasterImage:
    """Immutable RGBA image with a content-addressed identity.

    ``content_hash`` is the lowercase hex SHA-256 of the raw RGBA bytes, so
    two images are pixel-identical iff their hashes match, independent of any
    container format.
    """

    width: int
    height: int
    pixels: bytes  # row-major RGBA

    def __post_init__(self) -> None:
        expected = self.width * self.height * 4
        if len(self.pixels) != expected:
            raise PreconditionError(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"expected {expected} for {self.width}x{self.height} RGBA"
            )

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.pixels).hexdigest()

    @classmethod
    def from_array(cls, array: np.ndarray) -> "RasterImage":
        """Build from an (H, W, 4) or (H, W, 3) uint8 array."""
        if array.ndim != 3 or array.shape[2] not in (3, 4):
            raise PreconditionError(f"expected HxWx3 or HxWx4 array, got {array.shape}")
        if array.dtype != np.uint8:
            raise PreconditionError(f"expected uint8 array, got {array.dtype}")
        if array.shape[2] == 3:
            alpha = np.full(array.shape[:2] + (1,), 255, dtype=np.uint8)
            array = np.concatenate([array, alpha], axis=2)
        h, w = array.shape[:2]
        return cls(width=w, height=h, pixels=np.ascontiguousarray(array).tobytes())

    def to_array(self) -> np.ndarray:
        """Return an (H, W, 4) uint8 copy of the pixel data."""
        flat = np.frombuffer(self.pixels, dtype=np.uint8)
        return flat.reshape(self.height, self.width, 4).copy()

    @classmethod
    def blank(cls, width: int, height: int, color: tuple[int, int, int] = WHITE) -> "RasterImage":
        array = np.empty((height, width, 4), dtype=np.uint8)
        array[:, :, 0] = color[0]
        array[:, :, 1] = color[1]
        array[:, :, 2] = color[2]
        array[:, :, 3] = 255
        return cls.from_array(array)

    def to_png_bytes(self) -> bytes:
        img = Image.fromarray(self.to_array(), mode="RGBA")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "RasterImage":
        img = Image.open(io.BytesIO(data)).convert("RGBA")
        return cls.from_array(np.asarray(img, dtype=np.uint8))


@dataclass(frozen=True)
class Stroke:
    """One continuous pen stroke: ordered timed points plus width and color.

    Invariants enforced here: at least two points and non-decreasing
    timestamps. Canvas-bounds checks live on SketchDocument because a stroke
    does not know its canvas.
    """

    points: tuple[tuple[float, float, float], ...]  # (x px, y px, t ms)
    width: float
    color: tuple[int, int, int]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise PreconditionError("a stroke needs at least 2 points")
        if self.width <= 0:
            raise PreconditionError("stroke width must be positive")
        times = [p[2] for p in self.points]
        if any(b < a for a, b in zip(times, times[1:])):
            raise PreconditionError("stroke timestamps must be non-decreasing")

    def to_dict(self) -> dict:
        return {
            "points": [[float(x), float(y), float(t)] for x, y, t in self.points],
            "width": float(self.width),
            "color": list(self.color),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Stroke":
        return cls(
            points=tuple((float(x), float(y), float(t)) for x, y, t in data["points"]),
            width=float(data["width"]),
            color=tuple(int(c) for c in data["color"]),  # type: ignore[arg-type]
        )


DEFAULT_CANVAS = (1024, 1024)  # square, matching generated concept images


@dataclass(frozen=True)
class SketchDocument:
    """Ordered vector strokes on a fixed canvas.

    The raster is a pure function of (strokes, canvas): re-rasterizing always
    yields byte-identical pixels.
    """

    strokes: tuple[Stroke, ...]
    canvas: tuple[int, int] = DEFAULT_CANVAS

    def __post_init__(self) -> None:
        w, h = self.canvas
        if w <= 0 or h <= 0:
            raise PreconditionError("canvas dimensions must be positive")
        for stroke in self.strokes:
            for x, y, _ in stroke.points:
                if not (0 <= x <= w and 0 <= y <= h):
                    raise PreconditionError(
                        f"stroke point ({x}, {y}) outside canvas {w}x{h}"
                    )

    def rasterize(self) -> RasterImage:
        return rasterize(self)

    def to_dict(self) -> dict:
        return {
            "canvas": list(self.canvas),
            "strokes": [s.to_dict() for s in self.strokes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SketchDocument":
        return cls(
            strokes=tuple(Stroke.from_dict(s) for s in data.get("strokes", [])),
            canvas=tuple(int(v) for v in data.get("canvas", DEFAULT_CANVAS)),  # type: ignore[arg-type]
        )


def _paint_segment(
    rgb: np.ndarray,
    ax: float,
    ay: float,
    bx: float,
    by: float,
    radius: float,
    color: tuple[int, int, int],
) -> None:
    """Paint every pixel whose center lies within radius of segment AB.

    The squared-distance expression here is kept structurally identical to
    the scanline oracle used in tests, so vectorized and scalar evaluation
    produce bit-equal floats.
    """
    h, w = rgb.shape[:2]
    row_lo = max(int(np.floor(min(ay, by) - radius - 1.0)), 0)
    row_hi = min(int(np.ceil(max(ay, by) + radius + 1.0)), h - 1)
    col_lo = max(int(np.floor(min(ax, bx) - radius - 1.0)), 0)
    col_hi = min(int(np.ceil(max(ax, bx) + radius + 1.0)), w - 1)
    if row_lo > row_hi or col_lo > col_hi:
        return

    rows = np.arange(row_lo, row_hi + 1, dtype=np.float64)
    cols = np.arange(col_lo, col_hi + 1, dtype=np.float64)
    py = rows[:, None] + 0.5
    px = cols[None, :] + 0.5

    vx = bx - ax
    vy = by - ay
    length_sq = vx * vx + vy * vy
    if length_sq == 0.0:
        t = np.zeros((len(rows), len(cols)), dtype=np.float64)
    else:
        t = ((px - ax) * vx + (py - ay) * vy) / length_sq
        t = np.clip(t, 0.0, 1.0)
    cx = ax + t * vx
    cy = ay + t * vy
    dist_sq = (px - cx) * (px - cx) + (py - cy) * (py - cy)
    covered = dist_sq <= radius * radius

    patch = rgb[row_lo : row_hi + 1, col_lo : col_hi + 1]
    patch[covered] = color


def draw_strokes(base: np.ndarray, strokes: tuple[Stroke, ...] | list[Stroke]) -> None:
    """Render strokes onto an (H, W, 3) or (H, W, 4) uint8 array in place."""
    rgb = base[:, :, :3]
    for stroke in strokes:
        radius = stroke.width / 2.0
        pts = stroke.points
        for (ax, ay, _), (bx, by, _) in zip(pts, pts[1:]):
            _paint_segment(rgb, ax, ay, bx, by, radius, stroke.color)


def rasterize(doc: SketchDocument) -> RasterImage:
    """Render a sketch document to its reference raster.

    Raises EmptySketch when there is nothing to draw: callers must not feed
    blank images to vision providers by accident.
    """
    if not doc.strokes:
        raise EmptySketch("sketch document has no strokes")
    w, h = doc.canvas
    array = np.empty((h, w, 4), dtype=np.uint8)
    array[:, :, :3] = 255
    array[:, :, 3] = 255
    draw_strokes(array, doc.strokes)
    return RasterImage.from_array(array)
