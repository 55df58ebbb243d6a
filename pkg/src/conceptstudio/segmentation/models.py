"""Width-parameterized lite segmentation architectures.

Three families behind one registry so the training harness and CLI can swap
them by id. These are deliberately small CPU-friendly variants: a shared
three-stage encoder at 1/1, 1/2, and 1/4 resolution, then either a dilated
context head (deeplabv3_lite, the default), a skip-connected decoder
(unet_lite), or a top-down pyramid (fpn_lite). The encoder can optionally
load pretrained weights from a local file; nothing is fetched remotely.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Final

import torch
from torch import nn

from conceptstudio.errors import PreconditionError, WeightsUnavailable

DEFAULT_ARCHITECTURE: Final = "deeplabv3_lite"
DEFAULT_WIDTH: Final = 16


def _conv_block(in_ch: int, out_ch: int, *, stride: int = 1, dilation: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(
            in_ch,
            out_ch,
            kernel_size=3,
            stride=stride,
            padding=dilation,
            dilation=dilation,
            bias=False,
        ),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class LiteEncoder(nn.Module):
    """Three stages: full, 1/2, and 1/4 resolution."""

    def __init__(self, width: int) -> None:
        super().__init__()
        self.stage0 = _conv_block(3, width)
        self.stage1 = _conv_block(width, width * 2, stride=2)
        self.stage2 = _conv_block(width * 2, width * 4, stride=2)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        f0 = self.stage0(x)
        f1 = self.stage1(f0)
        f2 = self.stage2(f1)
        return f0, f1, f2


class DeepLabV3Lite(nn.Module):
    """Dilated context head over the 1/4-resolution features."""

    def __init__(self, num_classes: int, width: int) -> None:
        super().__init__()
        self.encoder = LiteEncoder(width)
        deep = width * 4
        self.branches = nn.ModuleList(
            [
                nn.Sequential(
                    nn.Conv2d(deep, deep, kernel_size=1, bias=False),
                    nn.BatchNorm2d(deep),
                    nn.ReLU(inplace=True),
                ),
                _conv_block(deep, deep, dilation=2),
                _conv_block(deep, deep, dilation=4),
            ]
        )
        self.project = _conv_block(deep * 3, deep)
        self.classifier = nn.Conv2d(deep, num_classes, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _, _, f2 = self.encoder(x)
        context = torch.cat([branch(f2) for branch in self.branches], dim=1)
        logits = self.classifier(self.project(context))
        return nn.functional.interpolate(
            logits, size=x.shape[2:], mode="bilinear", align_corners=False
        )


class UNetLite(nn.Module):
    """Skip-connected decoder back to full resolution."""

    def __init__(self, num_classes: int, width: int) -> None:
        super().__init__()
        self.encoder = LiteEncoder(width)
        self.up1 = _conv_block(width * 4 + width * 2, width * 2)
        self.up0 = _conv_block(width * 2 + width, width)
        self.classifier = nn.Conv2d(width, num_classes, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f0, f1, f2 = self.encoder(x)
        d1 = nn.functional.interpolate(
            f2, size=f1.shape[2:], mode="bilinear", align_corners=False
        )
        d1 = self.up1(torch.cat([d1, f1], dim=1))
        d0 = nn.functional.interpolate(
            d1, size=f0.shape[2:], mode="bilinear", align_corners=False
        )
        d0 = self.up0(torch.cat([d0, f0], dim=1))
        return self.classifier(d0)


class FPNLite(nn.Module):
    """Lateral 1x1 projections merged top-down, head at full resolution."""

    def __init__(self, num_classes: int, width: int) -> None:
        super().__init__()
        self.encoder = LiteEncoder(width)
        self.lateral2 = nn.Conv2d(width * 4, width, kernel_size=1)
        self.lateral1 = nn.Conv2d(width * 2, width, kernel_size=1)
        self.lateral0 = nn.Conv2d(width, width, kernel_size=1)
        self.head = _conv_block(width, width)
        self.classifier = nn.Conv2d(width, num_classes, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f0, f1, f2 = self.encoder(x)
        p2 = self.lateral2(f2)
        p1 = self.lateral1(f1) + nn.functional.interpolate(
            p2, size=f1.shape[2:], mode="bilinear", align_corners=False
        )
        p0 = self.lateral0(f0) + nn.functional.interpolate(
            p1, size=f0.shape[2:], mode="bilinear", align_corners=False
        )
        return self.classifier(self.head(p0))


ARCHITECTURES: Final[dict[str, Callable[[int, int], nn.Module]]] = {
    "deeplabv3_lite": DeepLabV3Lite,
    "unet_lite": UNetLite,
    "fpn_lite": FPNLite,
}


def build_model(
    arch_id: str,
    num_classes: int,
    *,
    width: int = DEFAULT_WIDTH,
    encoder_weights: str | Path | None = None,
) -> nn.Module:
    if arch_id not in ARCHITECTURES:
        raise PreconditionError(
            f"unknown architecture {arch_id!r}; registered: "
            f"{', '.join(sorted(ARCHITECTURES))}"
        )
    if num_classes < 2:
        raise PreconditionError("segmentation needs at least 2 classes")
    if width < 2:
        raise PreconditionError(f"width must be >= 2, got {width}")
    model = ARCHITECTURES[arch_id](num_classes, width)
    if encoder_weights is not None:
        path = Path(encoder_weights)
        if not path.exists():
            raise WeightsUnavailable(f"encoder weights not found at {path}")
        state = torch.load(path, map_location="cpu", weights_only=True)
        model.encoder.load_state_dict(state)  # type: ignore[union-attr]
    return model
