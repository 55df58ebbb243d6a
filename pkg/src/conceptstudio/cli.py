"""Command line for datasets, training, evaluation, and the HTTP service.

Exit codes: 0 success, 2 bad arguments or inputs, 3 dataset invalid,
4 provider failure. Reports are JSON with sorted keys and no timestamps, so
rerunning a mock-mode command reproduces the report byte for byte.
"""

from __future__ import annotations

import functools
import json
from pathlib import Path

import click
import numpy as np

from conceptstudio.errors import ConceptStudioError, DatasetTooSmall, ProviderError
from conceptstudio.mapping import build_overlay, map_functions, mapping_accuracy
from conceptstudio.model.documents import FunctionSolutionPair
from conceptstudio.model.raster import RasterImage
from conceptstudio.providers.base import Capability, ProviderRequest
from conceptstudio.providers.gateway import Gateway, GatewayConfig
from conceptstudio.providers.mock import MockScript, planted_error_script
from conceptstudio.providers.procedural import CATEGORY_COLORS, EXTRACTED_PAIRS, draw_category
from conceptstudio.providers.templates import render_template
from conceptstudio.segmentation.data import (
    list_sample_ids,
    read_sample,
    split_dataset,
    validate_dataset,
    write_sample,
    write_schema,
)
from conceptstudio.segmentation.inference import regions
from conceptstudio.segmentation.metrics import aggregate_iou
from conceptstudio.segmentation.models import DEFAULT_ARCHITECTURE
from conceptstudio.segmentation.schema import ClassSchema, LabelMask, schema_for
from conceptstudio.segmentation.training import (
    TrainingConfig,
    load_artifact,
    predict_labels,
    resplit,
    train,
)

EXIT_BAD_ARGS = 2
EXIT_DATASET_INVALID = 3
EXIT_PROVIDER_FAILURE = 4

CATEGORIES = sorted(CATEGORY_COLORS)


class CliError(click.ClickException):
    def __init__(self, message: str, exit_code: int) -> None:
        super().__init__(message)
        self.exit_code = exit_code


def mapped_errors(func):
    """Translate domain failures into the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except DatasetTooSmall as exc:
            raise CliError(str(exc), EXIT_DATASET_INVALID) from exc
        except ProviderError as exc:
            raise CliError(str(exc), EXIT_PROVIDER_FAILURE) from exc
        except ConceptStudioError as exc:
            raise CliError(str(exc), EXIT_BAD_ARGS) from exc

    return wrapper


def emit_report(report: dict, out: Path | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    click.echo(text, nl=False)


def check_dataset(root: Path, category: str) -> None:
    problems = validate_dataset(root, category)
    if problems:
        raise CliError("; ".join(problems), EXIT_DATASET_INVALID)


@click.group()
def main() -> None:
    """Concept-design studio tooling."""


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------


@main.group()
def dataset() -> None:
    """Generate, split, and inspect segmentation datasets."""


@dataset.command("gen")
@click.option("--category", required=True, type=click.Choice(CATEGORIES))
@click.option("--n", "count", required=True, type=click.IntRange(min=1))
@click.option("--provider", type=click.Choice(["mock", "live"]), default="mock")
@click.option("--out", type=click.Path(path_type=Path), default=Path("dataset"))
@click.option("--seed", type=int, default=0)
@click.option("--size", type=click.IntRange(min=16), default=512)
@mapped_errors
def dataset_gen(category, count, provider, out, seed, size) -> None:
    """Emit generation prompts; in mock mode also draw exact fixtures."""
    prompt = render_template("dataset_gen", Object_Name=category.replace("_", " "))
    ids = [f"{category}_{index:04d}" for index in range(count)]
    if provider == "mock":
        rng = np.random.Generator(np.random.PCG64(seed))
        write_schema(out, schema_for(category))
        for sample_id in ids:
            image, labels = draw_category(category, rng, size=size)
            write_sample(out, category, sample_id, image, labels)
    else:
        gateway = Gateway(GatewayConfig(mode="live"))
        images_dir = out / category / "images"
        images_dir.mkdir(parents=True, exist_ok=True)
        for sample_id in ids:
            response = gateway.invoke(
                ProviderRequest(
                    capability=Capability.GENERATE,
                    prompt=prompt,
                    params={"size": str(size)},
                )
            )
            (images_dir / f"{sample_id}.png").write_bytes(
                response.images[0].to_png_bytes()
            )
    emit_report(
        {
            "category": category,
            "count": count,
            "ids": ids,
            "out": str(out),
            "prompt": prompt,
            "provider": provider,
            "seed": seed,
            "size": size,
        },
        None,
    )


@dataset.command("split")
@click.option("--seed", required=True, type=int)
@click.option("--category", required=True, type=click.Choice(CATEGORIES))
@click.option("--dataset", "root", type=click.Path(path_type=Path), default=Path("dataset"))
@click.option("--out", type=click.Path(path_type=Path), default=None)
@mapped_errors
def dataset_split(seed, category, root, out) -> None:
    """Write the deterministic 8:1:1 train/val/test manifest."""
    check_dataset(root, category)
    split = split_dataset(list_sample_ids(root, category), seed)
    manifest = split.to_dict()
    manifest["category"] = category
    manifest["sizes"] = list(split.sizes)
    emit_report(manifest, out or root / category / "split.json")


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


@main.command("train")
@click.option("--category", required=True, type=click.Choice(CATEGORIES))
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--dataset", "root", type=click.Path(path_type=Path), default=Path("dataset"))
@click.option("--out", type=click.Path(path_type=Path), default=Path("models"))
@click.option("--arch", default=DEFAULT_ARCHITECTURE)
@click.option("--split-seed", type=int, default=0)
@click.option("--encoder-weights", type=click.Path(path_type=Path), default=None)
@mapped_errors
def train_cmd(category, config_path, root, out, arch, split_seed, encoder_weights) -> None:
    """Train a segmentation model on one category."""
    try:
        config = TrainingConfig.from_dict(json.loads(config_path.read_text()))
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"unreadable training config: {exc}", EXIT_BAD_ARGS) from exc
    check_dataset(root, category)
    result = train(
        root,
        category,
        config,
        arch_id=arch,
        out_dir=out,
        split_seed=split_seed,
        encoder_weights=encoder_weights,
    )
    emit_report(
        {
            "arch": arch,
            "artifact_dir": str(result.artifact_dir),
            "best_epoch": result.best_epoch,
            "best_val_mean_iou": result.best_val_mean_iou,
            "category": category,
            "config": config.to_dict(),
            "split_seed": split_seed,
            "test_mean_iou": result.test_mean_iou,
        },
        None,
    )


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


@main.group("eval")
def eval_group() -> None:
    """Reproduce the desk-scale evaluation tables."""


def _schema_for_masks(schema_path: Path | None, gt_dir: Path, labels) -> ClassSchema:
    if schema_path is not None:
        return ClassSchema.from_json(schema_path.read_text())
    sibling = gt_dir.parent / "schema.json"
    if sibling.exists():
        return ClassSchema.from_json(sibling.read_text())
    # no schema anywhere: name classes positionally from the labels seen
    top = max((int(arr.max()) for arr in labels), default=0)
    return ClassSchema(
        category="observed", classes=tuple(f"class_{i}" for i in range(1, top + 1))
    )


@eval_group.command("iou")
@click.option("--model", "model_dir", type=click.Path(path_type=Path), default=None)
@click.option("--dataset", "root", type=click.Path(path_type=Path), default=Path("dataset"))
@click.option("--split", "subset", type=click.Choice(["train", "val", "test"]), default="test")
@click.option("--pred-dir", type=click.Path(path_type=Path), default=None)
@click.option("--gt-dir", type=click.Path(path_type=Path), default=None)
@click.option("--schema", "schema_path", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@mapped_errors
def eval_iou(model_dir, root, subset, pred_dir, gt_dir, schema_path, out) -> None:
    """IoU table for a trained model, or between two mask directories."""
    from PIL import Image

    if (pred_dir is None) != (gt_dir is None):
        raise CliError("--pred-dir and --gt-dir go together", EXIT_BAD_ARGS)

    if pred_dir is not None:
        ids = sorted(path.stem for path in gt_dir.glob("*.png"))
        if not ids:
            raise CliError(f"no masks under {gt_dir}", EXIT_DATASET_INVALID)
        missing = [i for i in ids if not (pred_dir / f"{i}.png").exists()]
        if missing:
            raise CliError(
                f"predictions missing for {', '.join(missing)}", EXIT_DATASET_INVALID
            )

        def load(path: Path):
            return np.asarray(Image.open(path).convert("L"), dtype=np.uint8)

        gt_arrays = [load(gt_dir / f"{i}.png") for i in ids]
        schema = _schema_for_masks(schema_path, gt_dir, gt_arrays)
        pairs = [
            (
                LabelMask.from_array(load(pred_dir / f"{i}.png")),
                LabelMask.from_array(gt),
            )
            for i, gt in zip(ids, gt_arrays)
        ]
        report = aggregate_iou(pairs, schema)
        emit_report(
            {
                "gt_dir": str(gt_dir),
                "images": len(ids),
                "mean_iou": report.mean_iou,
                "per_class_iou": report.per_class_iou,
                "pred_dir": str(pred_dir),
            },
            out,
        )
        return

    if model_dir is None:
        raise CliError("pass --model, or --pred-dir with --gt-dir", EXIT_BAD_ARGS)
    model, schema, manifest = load_artifact(model_dir)
    category = manifest["category"]
    check_dataset(root, category)
    split = resplit(manifest)
    pairs = []
    for sample_id in split.subset(subset):
        image, labels = read_sample(root, category, sample_id)
        pairs.append(
            (
                LabelMask.from_array(predict_labels(model, image)),
                LabelMask.from_array(labels),
            )
        )
    report = aggregate_iou(pairs, schema)
    emit_report(
        {
            "category": category,
            "config": manifest["config"],
            "images": len(pairs),
            "mean_iou": report.mean_iou,
            "model": str(model_dir),
            "per_class_iou": report.per_class_iou,
            "split": subset,
            "split_seed": split.seed,
        },
        out,
    )


@eval_group.command("mapping")
@click.option("--category", required=True, type=click.Choice(CATEGORIES))
@click.option("--gold", "gold_path", required=True, type=click.Path(path_type=Path))
@click.option("--provider", type=click.Choice(["mock", "live"]), default="mock")
@click.option("--trials", type=click.IntRange(min=1), default=8)
@click.option("--seed", type=int, default=0)
@click.option("--plant-error", "plant_function", default=None,
              help="Corrupt this function's answer on --wrong-trials.")
@click.option("--wrong-trials", default="0",
              help="Comma-separated trial indices the planted error hits.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@mapped_errors
def eval_mapping(category, gold_path, provider, trials, seed,
                 plant_function, wrong_trials, out) -> None:
    """Function-to-component mapping accuracy over repeated trials."""
    try:
        gold = json.loads(gold_path.read_text())
    except (OSError, ValueError) as exc:
        raise CliError(f"unreadable gold mapping: {exc}", EXIT_BAD_ARGS) from exc
    if not isinstance(gold, dict) or not gold:
        raise CliError("gold mapping must be a nonempty object", EXIT_BAD_ARGS)

    script = MockScript(seed=seed)
    if plant_function is not None:
        try:
            wrong = [int(part) for part in wrong_trials.split(",") if part.strip()]
        except ValueError as exc:
            raise CliError(f"bad --wrong-trials: {exc}", EXIT_BAD_ARGS) from exc
        script = planted_error_script(seed, category, plant_function, wrong)
    gateway = Gateway(GatewayConfig(mode=provider), script=script)

    rng = np.random.Generator(np.random.PCG64(seed))
    pixels, labels = draw_category(category, rng)
    image = RasterImage.from_array(pixels)
    mask = LabelMask.from_array(labels)
    if category not in EXTRACTED_PAIRS:
        raise CliError(f"{category} has no function-solution fixture", EXIT_BAD_ARGS)
    overlay, legend = build_overlay(image, regions(mask, schema_for(category)))
    pairs = [FunctionSolutionPair(f, s) for f, s in EXTRACTED_PAIRS[category]]

    results = [
        map_functions(gateway, overlay, legend, pairs, category=category, trial=t)
        for t in range(trials)
    ]
    accuracy = mapping_accuracy(results, gold)
    emit_report(
        {
            "category": category,
            "gold": gold,
            "overall": accuracy.overall,
            "per_function": accuracy.per_function,
            "provider": provider,
            "seed": seed,
            "trials": trials,
        },
        out,
    )


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@main.command("serve")
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--store-dir", type=click.Path(path_type=Path), default=Path("store"))
@click.option("--provider-mode", type=click.Choice(["mock", "live"]), default="mock")
@click.option("--model-dir", type=click.Path(path_type=Path), default=None)
@click.option("--mock-seed", type=int, default=0)
@mapped_errors
def serve(port, host, store_dir, provider_mode, model_dir, mock_seed) -> None:
    """Run the HTTP session service."""
    import uvicorn

    from conceptstudio.service.app import create_app
    from conceptstudio.service.events import EventBus
    from conceptstudio.service.storage import SessionStore
    from conceptstudio.service.workflow import SessionManager

    manager = SessionManager(
        SessionStore(store_dir),
        Gateway(GatewayConfig(mode=provider_mode, mock_seed=mock_seed)),
        EventBus(),
        model_dir=model_dir,
    )
    uvicorn.run(create_app(manager), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
