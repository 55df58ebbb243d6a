"""Dataset splitting, on-disk layout, and training-time augmentation.

Layout (bit-exact contract):
    dataset/<category>/schema.json
    dataset/<category>/images/<id>.png
    dataset/<category>/masks/<id>.png

The split is an 8:1:1 partition: ids are sorted, shuffled by the seed, and
sliced to sizes floor(0.8 n) / floor(0.1 n) / remainder, so the same ids and
seed always produce the same manifest regardless of input order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from conceptstudio.errors import DatasetTooSmall, PreconditionError
from conceptstudio.segmentation.schema import ClassSchema, LabelMask

MIN_DATASET_SIZE = 10


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        all_ids = self.train + self.val + self.test
        if len(set(all_ids)) != len(all_ids):
            raise PreconditionError("split partitions overlap")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.val), len(self.test))

    def subset(self, name: str) -> tuple[str, ...]:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError:
            raise PreconditionError(f"unknown split subset {name!r}") from None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
        }

    @staticmethod
    def from_dict(data: dict) -> "DatasetSplit":
        return DatasetSplit(
            train=tuple(data["train"]),
            val=tuple(data["val"]),
            test=tuple(data["test"]),
            seed=int(data["seed"]),
        )


def split_dataset(ids: list[str], seed: int) -> DatasetSplit:
    if len(ids) < MIN_DATASET_SIZE:
        raise DatasetTooSmall(
            f"need at least {MIN_DATASET_SIZE} samples to split 8:1:1, got {len(ids)}"
        )
    if len(set(ids)) != len(ids):
        raise PreconditionError("dataset ids must be unique")
    ordered = sorted(ids)
    rng = np.random.Generator(np.random.PCG64(seed))
    permuted = [ordered[i] for i in rng.permutation(len(ordered))]
    n = len(permuted)
    n_train = math.floor(0.8 * n)
    n_val = math.floor(0.1 * n)
    return DatasetSplit(
        train=tuple(permuted[:n_train]),
        val=tuple(permuted[n_train : n_train + n_val]),
        test=tuple(permuted[n_train + n_val :]),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# On-disk dataset
# ---------------------------------------------------------------------------


def category_dir(root: str | Path, category: str) -> Path:
    return Path(root) / category


def write_sample(
    root: str | Path,
    category: str,
    sample_id: str,
    image: NDArray[np.uint8],
    labels: NDArray[np.uint8],
) -> None:
    base = category_dir(root, category)
    (base / "images").mkdir(parents=True, exist_ok=True)
    (base / "masks").mkdir(parents=True, exist_ok=True)
    Image.fromarray(image, mode="RGB").save(base / "images" / f"{sample_id}.png")
    Image.fromarray(labels, mode="L").save(base / "masks" / f"{sample_id}.png")


def write_schema(root: str | Path, schema: ClassSchema) -> None:
    base = category_dir(root, schema.category)
    base.mkdir(parents=True, exist_ok=True)
    (base / "schema.json").write_text(schema.to_json())


def read_schema(root: str | Path, category: str) -> ClassSchema:
    path = category_dir(root, category) / "schema.json"
    if not path.exists():
        raise PreconditionError(f"{path} is missing")
    return ClassSchema.from_json(path.read_text())


def list_sample_ids(root: str | Path, category: str) -> list[str]:
    images = category_dir(root, category) / "images"
    if not images.is_dir():
        return []
    return sorted(path.stem for path in images.glob("*.png"))


def read_sample(
    root: str | Path, category: str, sample_id: str
) -> tuple[NDArray[np.uint8], NDArray[np.uint8]]:
    base = category_dir(root, category)
    image_path = base / "images" / f"{sample_id}.png"
    mask_path = base / "masks" / f"{sample_id}.png"
    image = np.asarray(Image.open(image_path).convert("RGB"), dtype=np.uint8)
    labels = np.asarray(Image.open(mask_path).convert("L"), dtype=np.uint8)
    return image, labels


def validate_dataset(root: str | Path, category: str) -> list[str]:
    """Structural checks; returns human-readable problems, empty if valid."""
    problems: list[str] = []
    base = category_dir(root, category)
    if not base.is_dir():
        return [f"{base} does not exist"]
    try:
        schema = read_schema(root, category)
    except Exception as exc:
        return [f"schema.json unreadable: {exc}"]
    ids = list_sample_ids(root, category)
    if not ids:
        problems.append("no images found")
    for sample_id in ids:
        mask_path = base / "masks" / f"{sample_id}.png"
        if not mask_path.exists():
            problems.append(f"mask missing for {sample_id}")
            continue
        image, labels = read_sample(root, category, sample_id)
        if image.shape[:2] != labels.shape:
            problems.append(
                f"{sample_id}: image {image.shape[:2]} vs mask {labels.shape}"
            )
        try:
            LabelMask.from_array(labels).validate_for(schema)
        except PreconditionError as exc:
            problems.append(f"{sample_id}: {exc}")
    return problems


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


def augment(
    image: NDArray[np.uint8],
    labels: NDArray[np.uint8],
    rng: np.random.Generator,
    *,
    hflip_prob: float = 0.5,
    crop_scale: float = 0.9,
) -> tuple[NDArray[np.uint8], NDArray[np.uint8]]:
    """Random horizontal flip plus random crop resized back to full size.

    crop_scale is the retained area fraction; the crop window side is
    sqrt(crop_scale) of each dimension. Labels are resized with nearest
    neighbor so class indices stay exact.
    """
    if not 0.0 < crop_scale <= 1.0:
        raise PreconditionError(f"crop_scale must be in (0, 1], got {crop_scale}")
    if rng.random() < hflip_prob:
        image = image[:, ::-1].copy()
        labels = labels[:, ::-1].copy()
    if crop_scale < 1.0:
        height, width = labels.shape
        side = math.sqrt(crop_scale)
        crop_h = max(1, round(height * side))
        crop_w = max(1, round(width * side))
        top = int(rng.integers(0, height - crop_h + 1))
        left = int(rng.integers(0, width - crop_w + 1))
        image_crop = image[top : top + crop_h, left : left + crop_w]
        labels_crop = labels[top : top + crop_h, left : left + crop_w]
        image = np.asarray(
            Image.fromarray(image_crop, mode="RGB").resize(
                (width, height), Image.BILINEAR
            ),
            dtype=np.uint8,
        )
        labels = np.asarray(
            Image.fromarray(labels_crop, mode="L").resize(
                (width, height), Image.NEAREST
            ),
            dtype=np.uint8,
        )
    return image, labels
