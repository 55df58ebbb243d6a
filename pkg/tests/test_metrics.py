"""Metric oracles: brute-force IoU equality and dice loss closed forms."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import torch

from conceptstudio.errors import PreconditionError
from conceptstudio.segmentation.metrics import (
    aggregate_iou,
    compute_iou,
    dice_loss,
)
from conceptstudio.segmentation.schema import ClassSchema, LabelMask

SCHEMA4 = ClassSchema("quads", ("c1", "c2", "c3", "c4"))


def mask_of(array) -> LabelMask:
    return LabelMask.from_array(np.asarray(array, dtype=np.uint8))


def oracle_iou(pred: np.ndarray, gt: np.ndarray, labels) -> dict[int, Fraction]:
    """Per-pixel counting with exact rational arithmetic."""
    out: dict[int, Fraction] = {}
    for label in labels:
        tp = fp = fn = 0
        for row in range(pred.shape[0]):
            for col in range(pred.shape[1]):
                p = pred[row, col] == label
                g = gt[row, col] == label
                if p and g:
                    tp += 1
                elif p:
                    fp += 1
                elif g:
                    fn += 1
        if tp + fp + fn:
            out[label] = Fraction(tp, tp + fp + fn)
    return out


def test_identity_masks_give_mean_one():
    labels = np.zeros((6, 6), dtype=np.uint8)
    labels[0:2, :] = 1
    labels[2:4, :] = 2
    labels[4:6, :] = 3
    report = compute_iou(mask_of(labels), mask_of(labels), SCHEMA4)
    assert report.mean_iou == 1.0
    assert set(report.per_class_iou) == {"c1", "c2", "c3"}
    assert all(v == 1.0 for v in report.per_class_iou.values())


def test_worked_4x4_overlap_fixture():
    # gt class 1: left two columns; pred class 1: top two rows.
    gt = np.zeros((4, 4), dtype=np.uint8)
    gt[:, :2] = 1
    pred = np.zeros((4, 4), dtype=np.uint8)
    pred[:2, :] = 1
    report = compute_iou(mask_of(pred), mask_of(gt), SCHEMA4)
    assert report.per_class_iou["c1"] == pytest.approx(4 / 12, abs=1e-9)
    counts = report.counts
    assert (counts.tp[1], counts.fp[1], counts.fn[1]) == (4, 4, 4)


def test_compute_iou_matches_bruteforce_oracle_on_50_random_pairs():
    rng = np.random.Generator(np.random.PCG64(2024))
    for _ in range(50):
        pred = rng.integers(0, 5, size=(8, 8)).astype(np.uint8)
        gt = rng.integers(0, 5, size=(8, 8)).astype(np.uint8)
        report = compute_iou(mask_of(pred), mask_of(gt), SCHEMA4)
        expected = oracle_iou(pred, gt, labels=range(1, 5))
        got_counts = report.counts
        for label, ratio in expected.items():
            assert Fraction(
                got_counts.tp[label], got_counts.union(label)
            ) == ratio
        assert set(report.per_class_iou) == {
            SCHEMA4.label_name(label) for label in expected
        }
        # Exact float equality: same integer ratios, same division.
        for label, ratio in expected.items():
            name = SCHEMA4.label_name(label)
            assert report.per_class_iou[name] == ratio.numerator / ratio.denominator
        if expected:
            mean = sum(
                r.numerator / r.denominator for r in expected.values()
            ) / len(expected)
            assert report.mean_iou == pytest.approx(mean, abs=0)


def test_zero_union_classes_are_excluded():
    pred = np.zeros((4, 4), dtype=np.uint8)
    gt = np.zeros((4, 4), dtype=np.uint8)
    pred[0, 0] = 1
    gt[0, 0] = 1
    report = compute_iou(mask_of(pred), mask_of(gt), SCHEMA4)
    assert set(report.per_class_iou) == {"c1"}
    assert report.mean_iou == 1.0


def test_background_flag_includes_label_zero():
    pred = np.zeros((4, 4), dtype=np.uint8)
    gt = np.zeros((4, 4), dtype=np.uint8)
    pred[0, :] = 1
    report = compute_iou(mask_of(pred), mask_of(gt), SCHEMA4, include_background=True)
    assert "background" in report.per_class_iou
    assert report.per_class_iou["background"] == pytest.approx(12 / 16, abs=0)


def test_dimension_mismatch_rejected():
    with pytest.raises(PreconditionError):
        compute_iou(
            mask_of(np.zeros((4, 4))), mask_of(np.zeros((4, 5))), SCHEMA4
        )


def test_iou_bounds_property():
    rng = np.random.Generator(np.random.PCG64(77))
    for _ in range(25):
        pred = rng.integers(0, 5, size=(8, 8)).astype(np.uint8)
        gt = rng.integers(0, 5, size=(8, 8)).astype(np.uint8)
        report = compute_iou(mask_of(pred), mask_of(gt), SCHEMA4)
        assert 0.0 <= report.mean_iou <= 1.0
        equal_on_included = all(v == 1.0 for v in report.per_class_iou.values())
        assert (report.mean_iou == 1.0) == equal_on_included


def test_aggregate_iou_pools_counts():
    # One image with a perfect class-1, another with disjoint class-1:
    # pooled IoU must differ from the mean of per-image IoUs.
    a_pred = np.zeros((2, 2), dtype=np.uint8)
    a_pred[0, 0] = 1
    a_gt = a_pred.copy()
    b_pred = np.zeros((2, 2), dtype=np.uint8)
    b_pred[0, 0] = 1
    b_gt = np.zeros((2, 2), dtype=np.uint8)
    b_gt[1, 1] = 1
    report = aggregate_iou(
        [(mask_of(a_pred), mask_of(a_gt)), (mask_of(b_pred), mask_of(b_gt))],
        SCHEMA4,
    )
    assert report.per_class_iou["c1"] == pytest.approx(1 / 3, abs=0)


def test_dice_perfect_prediction_near_zero():
    gt = torch.tensor([[0, 1], [2, 1]])
    pred = torch.nn.functional.one_hot(gt, num_classes=3).permute(2, 0, 1).float()
    loss = dice_loss(pred, gt)
    assert loss.item() <= 1e-5


def test_dice_uniform_two_class_closed_form():
    # Uniform prediction over 2 classes on 2x2, gt all class 1.
    # Class 0: (2*0 + eps) / (2 + 0 + eps) ~= 0
    # Class 1: (2*2 + eps) / (2 + 4 + eps) = 2/3
    # Loss = 1 - (0 + 2/3)/2 = 2/3.
    pred = torch.full((2, 2, 2), 0.5)
    gt = torch.ones((2, 2), dtype=torch.long)
    loss = dice_loss(pred, gt)
    assert loss.item() == pytest.approx(2 / 3, abs=1e-4)


def test_dice_loss_bounds():
    rng = np.random.Generator(np.random.PCG64(5))
    for _ in range(10):
        logits = torch.tensor(rng.normal(size=(3, 4, 4)), dtype=torch.float32)
        pred = torch.softmax(logits, dim=0)
        gt = torch.tensor(rng.integers(0, 3, size=(4, 4)), dtype=torch.long)
        loss = dice_loss(pred, gt).item()
        assert 0.0 <= loss <= 1.0


def test_dice_gradient_matches_finite_differences():
    rng = np.random.Generator(np.random.PCG64(11))
    step = 1e-4
    for trial in range(20):
        logits = rng.normal(size=(3, 3, 3))
        pred = torch.tensor(
            np.exp(logits) / np.exp(logits).sum(axis=0, keepdims=True),
            dtype=torch.float64,
            requires_grad=True,
        )
        gt = torch.tensor(rng.integers(0, 3, size=(3, 3)), dtype=torch.long)
        loss = dice_loss(pred, gt)
        loss.backward()
        assert pred.grad is not None
        # Probe a handful of entries per trial.
        for _ in range(3):
            c = int(rng.integers(0, 3))
            y = int(rng.integers(0, 3))
            x = int(rng.integers(0, 3))
            with torch.no_grad():
                plus = pred.detach().clone()
                plus[c, y, x] += step
                minus = pred.detach().clone()
                minus[c, y, x] -= step
                numeric = (
                    dice_loss(plus, gt).item() - dice_loss(minus, gt).item()
                ) / (2 * step)
            analytic = pred.grad[c, y, x].item()
            scale = max(abs(numeric), abs(analytic), 1e-8)
            assert abs(numeric - analytic) / scale < 1e-4


def test_dice_rejects_non_probabilities():
    pred = torch.full((2, 2, 2), 0.9)  # sums to 1.8 per pixel
    gt = torch.zeros((2, 2), dtype=torch.long)
    with pytest.raises(PreconditionError):
        dice_loss(pred, gt)


def test_dice_shape_mismatch_rejected():
    pred = torch.full((2, 2, 2), 0.5)
    gt = torch.zeros((3, 3), dtype=torch.long)
    with pytest.raises(PreconditionError):
        dice_loss(pred, gt)
