"""Segmentation metrics: pixel-confusion mean IoU and multi-class dice loss.

Mean IoU follows the standard per-class formulation: for each class,
IoU = TP / (TP + FP + FN) over pixels, and the mean is taken over classes
with a nonzero union (a class absent from both masks is excluded rather
than scored as a free 1.0). Background is excluded by default; a flag
includes it for studies that want it scored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from conceptstudio.errors import PreconditionError
from conceptstudio.segmentation.schema import BACKGROUND, ClassSchema, LabelMask

DICE_EPSILON = 1e-6


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-class pixel confusion; labels are class indices, not names."""

    tp: dict[int, int]
    fp: dict[int, int]
    fn: dict[int, int]

    def union(self, label: int) -> int:
        return self.tp[label] + self.fp[label] + self.fn[label]

    def included_labels(self) -> list[int]:
        return [label for label in sorted(self.tp) if self.union(label) > 0]


@dataclass(frozen=True)
class IoUReport:
    """Per-class IoU (by label name) and their arithmetic mean."""

    per_class_iou: dict[str, float]
    mean_iou: float
    counts: ConfusionCounts

    def as_dict(self) -> dict:
        return {
            "per_class_iou": dict(self.per_class_iou),
            "mean_iou": self.mean_iou,
        }


def confusion_counts(
    pred: LabelMask, gt: LabelMask, schema: ClassSchema, *, include_background: bool = False
) -> ConfusionCounts:
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise PreconditionError(
            f"mask dimensions differ: {pred.width}x{pred.height} vs "
            f"{gt.width}x{gt.height}"
        )
    pred.validate_for(schema)
    gt.validate_for(schema)
    pred_arr = pred.to_array()
    gt_arr = gt.to_array()
    labels = range(BACKGROUND if include_background else 1, schema.num_labels)
    tp: dict[int, int] = {}
    fp: dict[int, int] = {}
    fn: dict[int, int] = {}
    for label in labels:
        in_pred = pred_arr == label
        in_gt = gt_arr == label
        tp[label] = int(np.count_nonzero(in_pred & in_gt))
        fp[label] = int(np.count_nonzero(in_pred & ~in_gt))
        fn[label] = int(np.count_nonzero(~in_pred & in_gt))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)


def iou_from_counts(counts: ConfusionCounts, schema: ClassSchema) -> IoUReport:
    included = counts.included_labels()
    per_class: dict[str, float] = {}
    for label in included:
        per_class[schema.label_name(label)] = counts.tp[label] / counts.union(label)
    # No class present in either mask: the masks agree on every included
    # class vacuously, so the mean is 1.
    mean = sum(per_class.values()) / len(included) if included else 1.0
    return IoUReport(per_class_iou=per_class, mean_iou=mean, counts=counts)


def compute_iou(
    pred: LabelMask, gt: LabelMask, schema: ClassSchema, *, include_background: bool = False
) -> IoUReport:
    counts = confusion_counts(pred, gt, schema, include_background=include_background)
    return iou_from_counts(counts, schema)


def aggregate_iou(
    pairs: list[tuple[LabelMask, LabelMask]],
    schema: ClassSchema,
    *,
    include_background: bool = False,
) -> IoUReport:
    """IoU over a dataset: confusion counts pooled across all images."""
    if not pairs:
        raise PreconditionError("aggregate_iou needs at least one mask pair")
    total_tp: dict[int, int] = {}
    total_fp: dict[int, int] = {}
    total_fn: dict[int, int] = {}
    for pred, gt in pairs:
        counts = confusion_counts(pred, gt, schema, include_background=include_background)
        for label in counts.tp:
            total_tp[label] = total_tp.get(label, 0) + counts.tp[label]
            total_fp[label] = total_fp.get(label, 0) + counts.fp[label]
            total_fn[label] = total_fn.get(label, 0) + counts.fn[label]
    return iou_from_counts(
        ConfusionCounts(tp=total_tp, fp=total_fp, fn=total_fn), schema
    )


def one_hot(gt: torch.Tensor, num_classes: int) -> torch.Tensor:
    """[H,W] int labels -> [C,H,W] float one-hot."""
    if gt.dim() != 2:
        raise PreconditionError(f"ground truth must be HxW, got shape {tuple(gt.shape)}")
    return (
        torch.nn.functional.one_hot(gt.long(), num_classes=num_classes)
        .permute(2, 0, 1)
        .float()
    )


def dice_loss(
    pred: torch.Tensor, gt: torch.Tensor, *, epsilon: float = DICE_EPSILON
) -> torch.Tensor:
    """1 - mean_c (2 * sum(p*g) + eps) / (sum(p) + sum(g) + eps).

    pred: [C,H,W] or [B,C,H,W] per-class probabilities; gt: matching [H,W]
    or [B,H,W] integer labels (or an already one-hot tensor of pred's
    shape). Sums run over all pixels (and the batch), one term per class,
    including the background channel.
    """
    if pred.dim() == 3:
        pred = pred.unsqueeze(0)
        gt = gt.unsqueeze(0)
    if pred.dim() != 4:
        raise PreconditionError(f"pred must be [B,C,H,W], got shape {tuple(pred.shape)}")
    num_classes = pred.shape[1]
    if gt.shape == pred.shape:
        gt_hot = gt.float()
    else:
        if gt.shape != (pred.shape[0], pred.shape[2], pred.shape[3]):
            raise PreconditionError(
                f"gt shape {tuple(gt.shape)} does not match pred {tuple(pred.shape)}"
            )
        gt_hot = torch.stack([one_hot(g, num_classes) for g in gt])
    totals = pred.detach().sum(dim=1)
    if not torch.allclose(totals, torch.ones_like(totals), atol=1e-2):
        raise PreconditionError("pred channels must sum to 1 per pixel")
    dims = (0, 2, 3)
    intersection = (pred * gt_hot).sum(dim=dims)
    denominator = pred.sum(dim=dims) + gt_hot.sum(dim=dims)
    dice = (2.0 * intersection + epsilon) / (denominator + epsilon)
    return 1.0 - dice.mean()
