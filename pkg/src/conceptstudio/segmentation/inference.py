"""Inference backends and region post-processing.

Two ways to get a label mask: a trained model (live mode) or the exact color
table of the procedural drawings (mock mode, where flat fill colors make
color equality the perfect decoder). Both feed regions(), which keeps the
largest 4-connected component per class and drops classes whose largest
component covers less than 0.1% of the image.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np
import torch
from numpy.typing import NDArray
from scipy import ndimage

from conceptstudio.errors import PreconditionError, SegmentationEmpty
from conceptstudio.model.raster import RasterImage
from conceptstudio.segmentation.schema import (
    BACKGROUND,
    ClassSchema,
    ComponentRegion,
    LabelMask,
)
from conceptstudio.segmentation.training import predict_labels

MIN_REGION_FRACTION = 0.001

Rgb = tuple[int, int, int]


def segment(model: torch.nn.Module, image: RasterImage) -> LabelMask:
    """Run the trained model over an RGB view of the image."""
    if image.width != image.height:
        raise PreconditionError(
            f"segmentation expects a square image, got {image.width}x{image.height}"
        )
    rgb = image.to_array()[:, :, :3]
    labels = predict_labels(model, rgb)
    mask = LabelMask.from_array(labels)
    if not np.any(labels != BACKGROUND):
        raise SegmentationEmpty("model predicted background everywhere")
    return mask


class ColorRuleBackend:
    """Label pixels by exact color equality against a fixed table."""

    def __init__(self, table: Mapping[int, Rgb]) -> None:
        if not table:
            raise PreconditionError("color table must not be empty")
        self.table = dict(table)

    @classmethod
    def for_category(cls, category: str) -> "ColorRuleBackend":
        """Backend keyed to the flat colors the offline image source paints."""
        from conceptstudio.providers.procedural import color_table

        return cls(color_table(category))

    def segment(self, image: RasterImage) -> LabelMask:
        rgb = image.to_array()[:, :, :3]
        labels = np.zeros(rgb.shape[:2], dtype=np.uint8)
        for label, color in self.table.items():
            matches = np.all(rgb == np.array(color, dtype=np.uint8), axis=2)
            labels[matches] = label
        if not np.any(labels != BACKGROUND):
            raise SegmentationEmpty("no pixel matched any component color")
        return LabelMask.from_array(labels)


def regions(
    mask: LabelMask,
    schema: ClassSchema,
    *,
    min_fraction: float = MIN_REGION_FRACTION,
) -> list[ComponentRegion]:
    """Largest connected component per class, tiny survivors dropped.

    Output masks are pairwise disjoint subsets of their class's raw pixels,
    ordered by class index. Raises SegmentationEmpty when nothing usable
    remains.
    """
    labels = mask.to_array()
    mask.validate_for(schema)
    if not np.any(labels != BACKGROUND):
        raise SegmentationEmpty("mask contains only background")
    threshold = min_fraction * labels.size
    out: list[ComponentRegion] = []
    for index in range(1, schema.num_labels):
        binary = labels == index
        if not binary.any():
            continue
        # scipy's default structure is 4-connectivity in 2D.
        components, count = ndimage.label(binary)
        sizes = np.bincount(components.ravel())
        sizes[0] = 0
        largest = int(sizes.argmax())
        if sizes[largest] < threshold:
            continue
        keep = components == largest
        rows, cols = np.nonzero(keep)
        centroid = (float(cols.mean()), float(rows.mean()))
        out.append(
            ComponentRegion(
                class_label=schema.label_name(index), mask=keep, centroid=centroid
            )
        )
    if not out:
        raise SegmentationEmpty(
            "every component fell under the minimum region size"
        )
    return out


def mask_to_bytes(mask: NDArray[np.bool_]) -> bytes:
    """Flatten a boolean region mask to 0/1 bytes (row-major)."""
    return mask.astype(np.uint8).tobytes()


def mask_from_bytes(data: bytes, width: int, height: int) -> NDArray[np.bool_]:
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width) != 0
