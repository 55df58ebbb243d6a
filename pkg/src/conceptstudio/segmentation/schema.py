"""Component class schemas and label masks.

A schema lists the component classes of one product category in label order;
label 0 is always background and is not part of the class list. Masks are
single-channel 8-bit images of class indices, persisted as PNG so they stay
lossless and diffable.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Final

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from conceptstudio.errors import PreconditionError

BACKGROUND: Final = 0

Rgb = tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class ComponentRegion:
    """One segmented component: class label, pixel mask, optional color."""

    class_label: str
    mask: NDArray[np.bool_]
    centroid: tuple[float, float]
    color_name: str | None = None
    overlay_color: Rgb | None = None

    def __post_init__(self) -> None:
        if self.mask.dtype != np.bool_ or self.mask.ndim != 2:
            raise PreconditionError("region mask must be a 2D boolean array")
        if not self.mask.any():
            raise PreconditionError(f"region {self.class_label!r} has an empty mask")

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class ClassSchema:
    """Ordered component classes for one category; index 0 is background."""

    category: str
    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.category:
            raise PreconditionError("schema category must be nonempty")
        if not self.classes:
            raise PreconditionError("schema needs at least one component class")
        if len(set(self.classes)) != len(self.classes):
            raise PreconditionError("schema class labels must be unique")
        if "background" in self.classes:
            raise PreconditionError("background is implicit, not a component class")

    @property
    def num_labels(self) -> int:
        """Total label count including background."""
        return 1 + len(self.classes)

    def label_index(self, class_label: str) -> int:
        try:
            return 1 + self.classes.index(class_label)
        except ValueError:
            raise PreconditionError(
                f"unknown class {class_label!r} for category {self.category!r}"
            ) from None

    def label_name(self, index: int) -> str:
        if index == BACKGROUND:
            return "background"
        if not 1 <= index <= len(self.classes):
            raise PreconditionError(f"label index {index} out of range")
        return self.classes[index - 1]

    def to_dict(self) -> dict:
        return {"category": self.category, "classes": list(self.classes)}

    @staticmethod
    def from_dict(data: dict) -> "ClassSchema":
        return ClassSchema(category=data["category"], classes=tuple(data["classes"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "ClassSchema":
        return ClassSchema.from_dict(json.loads(text))


@dataclass(frozen=True)
class LabelMask:
    """Row-major class indices for one image."""

    width: int
    height: int
    labels: bytes

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise PreconditionError("mask dimensions must be positive")
        if len(self.labels) != self.width * self.height:
            raise PreconditionError(
                f"mask carries {len(self.labels)} labels for "
                f"{self.width}x{self.height}"
            )

    def validate_for(self, schema: ClassSchema) -> None:
        highest = max(self.labels) if self.labels else 0
        if highest >= schema.num_labels:
            raise PreconditionError(
                f"mask has label {highest} but {schema.category!r} defines "
                f"only {schema.num_labels} (incl. background)"
            )

    @staticmethod
    def from_array(labels: NDArray[np.uint8]) -> "LabelMask":
        if labels.ndim != 2:
            raise PreconditionError(f"label array must be HxW, got {labels.shape}")
        if labels.dtype != np.uint8:
            raise PreconditionError(f"label array must be uint8, got {labels.dtype}")
        height, width = labels.shape
        return LabelMask(width=width, height=height, labels=labels.tobytes())

    def to_array(self) -> NDArray[np.uint8]:
        return np.frombuffer(self.labels, dtype=np.uint8).reshape(
            self.height, self.width
        )

    def to_png_bytes(self) -> bytes:
        image = Image.fromarray(self.to_array(), mode="L")
        buffer = io.BytesIO()
        image.save(buffer, format="PNG")
        return buffer.getvalue()

    @staticmethod
    def from_png_bytes(data: bytes) -> "LabelMask":
        image = Image.open(io.BytesIO(data))
        if image.mode != "L":
            image = image.convert("L")
        return LabelMask.from_array(np.asarray(image, dtype=np.uint8))


# Built-in categories. The published dataset segments the car into five
# components and the other two categories into three each; the shapes
# category is a synthetic training fixture.
CAR: Final = ClassSchema(
    "car", ("body", "wheel", "windshield", "headlight", "bumper")
)
NERF_GUN: Final = ClassSchema("nerf_gun", ("body", "barrel", "magazine"))
ROBOT_DOG: Final = ClassSchema("robot_dog", ("body", "head", "legs"))
SHAPES: Final = ClassSchema("shapes", ("disc", "slab", "wedge"))

BUILTIN_SCHEMAS: Final[dict[str, ClassSchema]] = {
    s.category: s for s in (CAR, NERF_GUN, ROBOT_DOG, SHAPES)
}


def schema_for(category: str) -> ClassSchema:
    try:
        return BUILTIN_SCHEMAS[category]
    except KeyError:
        raise PreconditionError(
            f"unknown category {category!r}; built-ins: "
            f"{', '.join(sorted(BUILTIN_SCHEMAS))}"
        ) from None
