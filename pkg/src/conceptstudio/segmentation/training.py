"""Training loop with the published hyperparameters.

Defaults: multi-class dice loss, Adam, initial lr 1e-4, 40 epochs, lr decay
x0.1 from epoch 25 (1-indexed, inclusive), random horizontal flip and crop
augmentation. The loop checkpoints the best validation mean-IoU weights,
logs one JSONL metrics object per epoch, and writes a manifest that pins
everything needed to reproduce the run.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from numpy.typing import NDArray

from conceptstudio.errors import PreconditionError, TrainingDiverged
from conceptstudio.segmentation.data import (
    DatasetSplit,
    augment,
    list_sample_ids,
    read_sample,
    read_schema,
    split_dataset,
)
from conceptstudio.segmentation.metrics import IoUReport, aggregate_iou, dice_loss
from conceptstudio.segmentation.models import (
    DEFAULT_ARCHITECTURE,
    DEFAULT_WIDTH,
    build_model,
)
from conceptstudio.segmentation.schema import ClassSchema, LabelMask


@dataclass(frozen=True)
class TrainingConfig:
    initial_lr: float = 1e-4
    epochs: int = 40
    decay_factor: float = 0.1
    decay_epoch: int = 25
    hflip_prob: float = 0.5
    crop_scale: float = 0.9
    batch_size: int = 8
    width: int = DEFAULT_WIDTH
    seed: int = 0
    augmentation: bool = True

    def __post_init__(self) -> None:
        if min(self.initial_lr, self.decay_factor, self.epochs, self.batch_size) <= 0:
            raise PreconditionError("training config values must be positive")
        if not 0 <= self.decay_epoch <= self.epochs:
            raise PreconditionError(
                f"decay_epoch {self.decay_epoch} outside 1..{self.epochs}"
            )
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise PreconditionError("hflip_prob must be a probability")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "TrainingConfig":
        return TrainingConfig(**data)


def lr_at_epoch(config: TrainingConfig, epoch: int) -> float:
    """Learning rate for a 1-indexed epoch; decay applies from decay_epoch
    inclusive."""
    if not 1 <= epoch <= config.epochs:
        raise PreconditionError(f"epoch {epoch} outside 1..{config.epochs}")
    if epoch < config.decay_epoch:
        return config.initial_lr
    return config.initial_lr * config.decay_factor


def to_input_tensor(image: NDArray[np.uint8]) -> torch.Tensor:
    """HxWx3 uint8 -> [3,H,W] float in [0,1]; shared by train and inference."""
    planes = np.ascontiguousarray(image, dtype=np.float32)
    return torch.from_numpy(planes).permute(2, 0, 1) / 255.0


def predict_labels(model: torch.nn.Module, image: NDArray[np.uint8]) -> NDArray[np.uint8]:
    model.eval()
    with torch.no_grad():
        logits = model(to_input_tensor(image).unsqueeze(0))
        labels = logits.argmax(dim=1)[0]
    return labels.numpy().astype(np.uint8)


@dataclass(frozen=True)
class TrainResult:
    artifact_dir: Path
    best_epoch: int
    best_val_mean_iou: float
    test_mean_iou: float
    metrics: tuple[dict, ...] = field(default_factory=tuple)


def _evaluate(
    model: torch.nn.Module,
    samples: list[tuple[NDArray[np.uint8], NDArray[np.uint8]]],
    schema: ClassSchema,
) -> IoUReport:
    pairs = [
        (
            LabelMask.from_array(predict_labels(model, image)),
            LabelMask.from_array(labels),
        )
        for image, labels in samples
    ]
    return aggregate_iou(pairs, schema)


def train(
    dataset_root: str | Path,
    category: str,
    config: TrainingConfig,
    *,
    arch_id: str = DEFAULT_ARCHITECTURE,
    out_dir: str | Path,
    split_seed: int = 0,
    encoder_weights: str | Path | None = None,
) -> TrainResult:
    """Train on one category's dataset and write a model artifact.

    The artifact directory holds weights.pt (best validation epoch),
    metrics.jsonl (one object per epoch), and manifest.json.
    """
    schema = read_schema(dataset_root, category)
    ids = list_sample_ids(dataset_root, category)
    split = split_dataset(ids, split_seed)
    loaded = {
        sample_id: read_sample(dataset_root, category, sample_id) for sample_id in ids
    }
    train_samples = [loaded[i] for i in split.train]
    val_samples = [loaded[i] for i in split.val]
    test_samples = [loaded[i] for i in split.test]

    torch.manual_seed(config.seed)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    model = build_model(
        arch_id, schema.num_labels, width=config.width, encoder_weights=encoder_weights
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=config.initial_lr)

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    metrics_path = out_path / "metrics.jsonl"
    weights_path = out_path / "weights.pt"

    best_val = -1.0
    best_epoch = 0
    metrics: list[dict] = []
    with metrics_path.open("w", encoding="utf-8") as metrics_file:
        for epoch in range(1, config.epochs + 1):
            lr = lr_at_epoch(config, epoch)
            for group in optimizer.param_groups:
                group["lr"] = lr

            model.train()
            order = rng.permutation(len(train_samples))
            epoch_losses: list[float] = []
            for start in range(0, len(order), config.batch_size):
                batch_ids = order[start : start + config.batch_size]
                images = []
                targets = []
                for index in batch_ids:
                    image, labels = train_samples[index]
                    if config.augmentation:
                        image, labels = augment(
                            image,
                            labels,
                            rng,
                            hflip_prob=config.hflip_prob,
                            crop_scale=config.crop_scale,
                        )
                    images.append(to_input_tensor(image))
                    targets.append(torch.from_numpy(labels.astype(np.int64)))
                batch = torch.stack(images)
                target = torch.stack(targets)
                optimizer.zero_grad()
                probabilities = torch.softmax(model(batch), dim=1)
                loss = dice_loss(probabilities, target)
                if not math.isfinite(loss.item()):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch} "
                        f"(lr={lr}, batch_start={start})"
                    )
                loss.backward()
                optimizer.step()
                epoch_losses.append(loss.item())

            val_report = _evaluate(model, val_samples, schema)
            entry = {
                "epoch": epoch,
                "loss": float(np.mean(epoch_losses)),
                "lr": lr,
                "val_mean_iou": val_report.mean_iou,
            }
            metrics.append(entry)
            metrics_file.write(json.dumps(entry, sort_keys=True) + "\n")
            metrics_file.flush()

            if val_report.mean_iou > best_val:
                best_val = val_report.mean_iou
                best_epoch = epoch
                torch.save(model.state_dict(), weights_path)

    model.load_state_dict(torch.load(weights_path, map_location="cpu", weights_only=True))
    test_report = _evaluate(model, test_samples, schema)

    manifest = {
        "category": category,
        "arch_id": arch_id,
        "config": config.to_dict(),
        "split": split.to_dict(),
        "schema": schema.to_dict(),
        "best_epoch": best_epoch,
        "best_val_mean_iou": best_val,
        "test_mean_iou": test_report.mean_iou,
        "encoder_weights": str(encoder_weights) if encoder_weights else None,
    }
    (out_path / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return TrainResult(
        artifact_dir=out_path,
        best_epoch=best_epoch,
        best_val_mean_iou=best_val,
        test_mean_iou=test_report.mean_iou,
        metrics=tuple(metrics),
    )


def load_artifact(artifact_dir: str | Path) -> tuple[torch.nn.Module, ClassSchema, dict]:
    """Load (model, schema, manifest) from a training artifact directory."""
    base = Path(artifact_dir)
    manifest_path = base / "manifest.json"
    if not manifest_path.exists():
        raise PreconditionError(f"{manifest_path} is missing")
    manifest = json.loads(manifest_path.read_text())
    schema = ClassSchema.from_dict(manifest["schema"])
    config = TrainingConfig.from_dict(manifest["config"])
    model = build_model(manifest["arch_id"], schema.num_labels, width=config.width)
    model.load_state_dict(
        torch.load(base / "weights.pt", map_location="cpu", weights_only=True)
    )
    model.eval()
    return model, schema, manifest


def resplit(manifest: dict) -> DatasetSplit:
    return DatasetSplit.from_dict(manifest["split"])


def quick_config(**overrides) -> TrainingConfig:
    """Convenience for tests: full defaults with selective overrides."""
    return replace(TrainingConfig(), **overrides)
