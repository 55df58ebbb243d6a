"""Procedural concept drawings backing the mock providers.

Every category is drawn as flat-colored geometric components on a white
background, with a fixed color per component class. That makes the mock
pipeline self-grounding: the drawing *is* its own segmentation ground truth
(via the exact color table), the scripted vision answers have a well-defined
gold mapping, and every fixture downstream of generation is deterministic.

Seeded jitter moves and resizes parts between samples; it never touches the
colors, so the color table stays a perfect decoder for any sample.
"""

from __future__ import annotations

from typing import Callable, Final, Mapping

import numpy as np
from numpy.typing import NDArray

from conceptstudio.errors import PreconditionError
from conceptstudio.segmentation.schema import ClassSchema, schema_for

Rgb = tuple[int, int, int]

# Flat fill color per component class, per category. Chosen to be far from
# the overlay palette's pure primaries and from pure white (background).
CATEGORY_COLORS: Final[dict[str, dict[str, Rgb]]] = {
    "car": {
        "body": (70, 130, 180),
        "wheel": (40, 40, 40),
        "windshield": (150, 210, 235),
        "headlight": (250, 215, 80),
        "bumper": (110, 110, 110),
    },
    "nerf_gun": {
        "body": (240, 140, 50),
        "barrel": (60, 100, 220),
        "magazine": (60, 190, 90),
    },
    "robot_dog": {
        "body": (180, 180, 190),
        "head": (200, 60, 80),
        "legs": (70, 90, 90),
    },
    "shapes": {
        "disc": (200, 50, 50),
        "slab": (50, 160, 60),
        "wedge": (60, 60, 200),
    },
}

# The seven functions the mock extractor reports per category, in order,
# with the component class that truly realizes each (the gold mapping the
# scripted vision provider answers from).
EXTRACTED_PAIRS: Final[dict[str, tuple[tuple[str, str], ...]]] = {
    "car": (
        ("wheel size", "19 inches"),
        ("sunroof", "panoramic"),
        ("headlight shape", "round"),
        ("bumper style", "chrome"),
        ("windshield tint", "light"),
        ("body color", "steel blue"),
        ("engine material", "aluminum"),
    ),
    "nerf_gun": (
        ("barrel length", "long"),
        ("magazine capacity", "12 darts"),
        ("grip texture", "ribbed"),
        ("trigger guard", "rounded"),
        ("muzzle style", "flared"),
        ("body color", "orange"),
        ("spring material", "steel"),
    ),
    "robot_dog": (
        ("head shape", "angular"),
        ("leg length", "short"),
        ("tail style", "antenna"),
        ("ear shape", "pointed"),
        ("body armor", "matte panels"),
        ("eye type", "led"),
        ("battery chemistry", "lithium"),
    ),
}

GOLD_MAPPINGS: Final[dict[str, dict[str, str]]] = {
    "car": {
        "wheel size": "wheel",
        "sunroof": "body",
        "headlight shape": "headlight",
        "bumper style": "bumper",
        "windshield tint": "windshield",
        "body color": "body",
        "engine material": "body",
    },
    "nerf_gun": {
        "barrel length": "barrel",
        "magazine capacity": "magazine",
        "grip texture": "body",
        "trigger guard": "body",
        "muzzle style": "barrel",
        "body color": "body",
        "spring material": "body",
    },
    "robot_dog": {
        "head shape": "head",
        "leg length": "legs",
        "tail style": "body",
        "ear shape": "head",
        "body armor": "body",
        "eye type": "head",
        "battery chemistry": "body",
    },
}

# Functions whose change is internal: the scripted visibility check answers
# "no" for these, so edits land as metadata-only.
INVISIBLE_FUNCTIONS: Final[dict[str, frozenset[str]]] = {
    "car": frozenset({"engine material"}),
    "nerf_gun": frozenset({"spring material"}),
    "robot_dog": frozenset({"battery chemistry"}),
}

# Canned alternatives for functions that appear in worked examples; anything
# else falls back to deterministic "enhanced/simplified" variants.
ALTERNATIVES: Final[dict[str, tuple[str, ...]]] = {
    "wheel size": ("20 inches", "18 inches"),
    "sunroof": ("tilt-only", "none"),
    "barrel length": ("short", "extended"),
    "head shape": ("rounded", "wedge"),
}

PROMPT_CATEGORY_HINTS: Final[tuple[tuple[str, str], ...]] = (
    ("pickup", "car"),
    ("truck", "car"),
    ("car", "car"),
    ("vehicle", "car"),
    ("nerf", "nerf_gun"),
    ("blaster", "nerf_gun"),
    ("dart", "nerf_gun"),
    ("gun", "nerf_gun"),
    ("dog", "robot_dog"),
    ("robot", "robot_dog"),
)


def sniff_category(text: str) -> str:
    """Best-effort category from free text; defaults to car."""
    lowered = text.lower()
    for keyword, category in PROMPT_CATEGORY_HINTS:
        if keyword in lowered:
            return category
    return "car"


# ---------------------------------------------------------------------------
# Drawing primitives. All coordinates are normalized [0, 1] floats scaled by
# the canvas size; later fills overwrite earlier ones in both image and mask.
# ---------------------------------------------------------------------------


def _fill_rect(
    rgb: NDArray[np.uint8],
    labels: NDArray[np.uint8],
    x0: float,
    y0: float,
    x1: float,
    y1: float,
    color: Rgb,
    label: int,
) -> None:
    size_y, size_x = labels.shape
    c0 = max(0, int(x0 * size_x))
    r0 = max(0, int(y0 * size_y))
    c1 = min(size_x, int(x1 * size_x))
    r1 = min(size_y, int(y1 * size_y))
    if c1 <= c0 or r1 <= r0:
        return
    rgb[r0:r1, c0:c1] = color
    labels[r0:r1, c0:c1] = label


def _fill_circle(
    rgb: NDArray[np.uint8],
    labels: NDArray[np.uint8],
    cx: float,
    cy: float,
    radius: float,
    color: Rgb,
    label: int,
) -> None:
    size_y, size_x = labels.shape
    ys = np.arange(size_y)[:, None] + 0.5
    xs = np.arange(size_x)[None, :] + 0.5
    inside = (xs - cx * size_x) ** 2 + (ys - cy * size_y) ** 2 <= (radius * size_x) ** 2
    rgb[inside] = color
    labels[inside] = label


def _fill_triangle(
    rgb: NDArray[np.uint8],
    labels: NDArray[np.uint8],
    apex_x: float,
    apex_y: float,
    half_width: float,
    height: float,
    color: Rgb,
    label: int,
) -> None:
    """Upward-pointing isoceles triangle, apex at (apex_x, apex_y)."""
    size_y, size_x = labels.shape
    ys = (np.arange(size_y)[:, None] + 0.5) / size_y
    xs = (np.arange(size_x)[None, :] + 0.5) / size_x
    down = (ys - apex_y) / height
    inside = (down >= 0.0) & (down <= 1.0) & (np.abs(xs - apex_x) <= half_width * down)
    rgb[inside] = color
    labels[inside] = label


def _blank(size: int) -> tuple[NDArray[np.uint8], NDArray[np.uint8]]:
    rgb = np.full((size, size, 3), 255, dtype=np.uint8)
    labels = np.zeros((size, size), dtype=np.uint8)
    return rgb, labels


def _draw_car(
    rng: np.random.Generator, size: int
) -> tuple[NDArray[np.uint8], NDArray[np.uint8]]:
    schema = schema_for("car")
    colors = CATEGORY_COLORS["car"]
    rgb, labels = _blank(size)

    def lab(name: str) -> int:
        return schema.label_index(name)

    j = rng.uniform(-0.02, 0.02, size=6)
    body_top = 0.45 + j[0]
    body_bot = 0.68 + j[1]
    _fill_rect(rgb, labels, 0.10 + j[2], body_top, 0.90 + j[3], body_bot,
               colors["body"], lab("body"))
    _fill_rect(rgb, labels, 0.28 + j[4], 0.30 + j[5], 0.62 + j[4], body_top,
               colors["body"], lab("body"))
    _fill_rect(rgb, labels, 0.84, body_bot - 0.06, 0.94, body_bot,
               colors["bumper"], lab("bumper"))
    _fill_rect(rgb, labels, 0.50 + j[4], 0.32 + j[5], 0.61 + j[4], body_top - 0.01,
               colors["windshield"], lab("windshield"))
    _fill_rect(rgb, labels, 0.85 + j[3], body_top + 0.02, 0.90 + j[3], body_top + 0.07,
               colors["headlight"], lab("headlight"))
    wheel_r = 0.085 + rng.uniform(-0.01, 0.01)
    _fill_circle(rgb, labels, 0.28 + j[2], body_bot + 0.02, wheel_r,
                 colors["wheel"], lab("wheel"))
    _fill_circle(rgb, labels, 0.72 + j[3], body_bot + 0.02, wheel_r,
                 colors["wheel"], lab("wheel"))
    return rgb, labels


def _draw_nerf_gun(
    rng: np.random.Generator, size: int
) -> tuple[NDArray[np.uint8], NDArray[np.uint8]]:
    schema = schema_for("nerf_gun")
    colors = CATEGORY_COLORS["nerf_gun"]
    rgb, labels = _blank(size)
    j = rng.uniform(-0.02, 0.02, size=5)
    body_top = 0.38 + j[0]
    body_bot = 0.54 + j[1]
    _fill_rect(rgb, labels, 0.12 + j[2], body_top, 0.66 + j[3], body_bot,
               colors["body"], schema.label_index("body"))
    _fill_rect(rgb, labels, 0.20 + j[2], body_bot, 0.33 + j[2], 0.78 + j[4],
               colors["body"], schema.label_index("body"))
    _fill_rect(rgb, labels, 0.66 + j[3], body_top + 0.03, 0.92 + j[3], body_bot - 0.04,
               colors["barrel"], schema.label_index("barrel"))
    _fill_rect(rgb, labels, 0.44 + j[2], body_bot, 0.57 + j[2], 0.76 + j[4],
               colors["magazine"], schema.label_index("magazine"))
    return rgb, labels


def _draw_robot_dog(
    rng: np.random.Generator, size: int
) -> tuple[NDArray[np.uint8], NDArray[np.uint8]]:
    schema = schema_for("robot_dog")
    colors = CATEGORY_COLORS["robot_dog"]
    rgb, labels = _blank(size)
    j = rng.uniform(-0.02, 0.02, size=5)
    body_top = 0.36 + j[0]
    body_bot = 0.56 + j[1]
    _fill_rect(rgb, labels, 0.22 + j[2], body_top, 0.74 + j[3], body_bot,
               colors["body"], schema.label_index("body"))
    for leg_x in (0.26, 0.38, 0.54, 0.66):
        _fill_rect(rgb, labels, leg_x + j[2], body_bot, leg_x + 0.06 + j[2],
                   0.82 + j[4], colors["legs"], schema.label_index("legs"))
    _fill_rect(rgb, labels, 0.70 + j[3], 0.18 + j[0], 0.90 + j[3], body_top + 0.02,
               colors["head"], schema.label_index("head"))
    return rgb, labels


def _draw_shapes(
    rng: np.random.Generator, size: int
) -> tuple[NDArray[np.uint8], NDArray[np.uint8]]:
    """Training fixture: disc + slab + wedge, always all three present."""
    schema = schema_for("shapes")
    colors = CATEGORY_COLORS["shapes"]
    rgb, labels = _blank(size)
    disc_cx = rng.uniform(0.2, 0.45)
    disc_cy = rng.uniform(0.2, 0.5)
    disc_r = rng.uniform(0.10, 0.18)
    _fill_circle(rgb, labels, disc_cx, disc_cy, disc_r,
                 colors["disc"], schema.label_index("disc"))
    slab_x = rng.uniform(0.5, 0.7)
    slab_y = rng.uniform(0.15, 0.4)
    _fill_rect(rgb, labels, slab_x, slab_y, slab_x + rng.uniform(0.15, 0.28),
               slab_y + rng.uniform(0.12, 0.22), colors["slab"],
               schema.label_index("slab"))
    apex_x = rng.uniform(0.3, 0.7)
    apex_y = rng.uniform(0.55, 0.68)
    _fill_triangle(rgb, labels, apex_x, apex_y, rng.uniform(0.12, 0.2),
                   rng.uniform(0.15, 0.28), colors["wedge"],
                   schema.label_index("wedge"))
    return rgb, labels


_DRAWERS: Final[
    dict[str, Callable[[np.random.Generator, int], tuple[NDArray[np.uint8], NDArray[np.uint8]]]]
] = {
    "car": _draw_car,
    "nerf_gun": _draw_nerf_gun,
    "robot_dog": _draw_robot_dog,
    "shapes": _draw_shapes,
}


def draw_category(
    category: str, rng: np.random.Generator, size: int = 512
) -> tuple[NDArray[np.uint8], NDArray[np.uint8]]:
    """Draw one sample: (HxWx3 uint8 image, HxW uint8 label mask)."""
    if size < 16:
        raise PreconditionError(f"canvas size {size} too small to draw on")
    try:
        drawer = _DRAWERS[category]
    except KeyError:
        raise PreconditionError(
            f"no procedural drawer for category {category!r}"
        ) from None
    return drawer(rng, size)


def color_table(category: str) -> Mapping[int, Rgb]:
    """label index -> exact fill color, the decoder for procedural images."""
    schema = schema_for(category)
    colors = CATEGORY_COLORS[category]
    return {schema.label_index(name): colors[name] for name in schema.classes}
