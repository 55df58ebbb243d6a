"""Segmentation: schemas, metrics, datasets, models, training, inference."""

from conceptstudio.segmentation.data import DatasetSplit, augment, split_dataset
from conceptstudio.segmentation.inference import ColorRuleBackend, regions, segment
from conceptstudio.segmentation.metrics import (
    ConfusionCounts,
    IoUReport,
    aggregate_iou,
    compute_iou,
    dice_loss,
)
from conceptstudio.segmentation.models import (
    ARCHITECTURES,
    DEFAULT_ARCHITECTURE,
    build_model,
)
from conceptstudio.segmentation.schema import (
    BUILTIN_SCHEMAS,
    ClassSchema,
    LabelMask,
    schema_for,
)
from conceptstudio.segmentation.training import (
    TrainingConfig,
    TrainResult,
    load_artifact,
    lr_at_epoch,
    train,
)

__all__ = [
    "ARCHITECTURES",
    "BUILTIN_SCHEMAS",
    "DEFAULT_ARCHITECTURE",
    "ClassSchema",
    "ColorRuleBackend",
    "ConfusionCounts",
    "DatasetSplit",
    "IoUReport",
    "LabelMask",
    "TrainResult",
    "TrainingConfig",
    "aggregate_iou",
    "augment",
    "build_model",
    "compute_iou",
    "dice_loss",
    "load_artifact",
    "lr_at_epoch",
    "regions",
    "schema_for",
    "segment",
    "split_dataset",
    "train",
]
