"""Two-scale patch discriminator ensemble.

Each network scores overlapping patches of (image ++ layout) with a stack
of strided convolutions, exposing every intermediate feature map for the
feature-matching loss. The second network sees 2x average-pooled copies.
"""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig
from .types import ValidationError


class PatchDiscriminator(nn.Module):
    """Strided conv stack -> patch logit map + per-layer features."""

    def __init__(self, in_channels, widths=(64, 128, 256, 512)):
        super().__init__()
        convs = []
        prev = in_channels
        for i, w in enumerate(widths):
            stride = 2 if i < len(widths) - 1 else 1
            convs.append(nn.Conv2d(prev, w, 4, stride=stride, padding=2))
            prev = w
        self.convs = nn.ModuleList(convs)
        self.head = nn.Conv2d(prev, 1, 4, stride=1, padding=2)

    def forward(self, x):
        feats = []
        h = x
        for conv in self.convs:
            h = F.leaky_relu(conv(h), 0.2)
            feats.append(h)
        return self.head(h), feats


class MultiScaleDiscriminator(nn.Module):
    """Full-scale and half-scale discriminators (same architecture, own weights)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.conditioned = config.use_semantics
        in_channels = 3 + (config.n_regions if self.conditioned else 0)
        self.full_scale = PatchDiscriminator(in_channels, config.disc_channels)
        self.half_scale = PatchDiscriminator(in_channels, config.disc_channels)

    def forward(self, img, mask=None):
        """Returns [(logits, features), ...] for the full and half scales."""
        if self.conditioned:
            if mask is None:
                raise ValidationError("conditioned discriminator requires a layout")
            if mask.shape[-2:] != img.shape[-2:]:
                raise ValidationError(
                    f"mask dims {tuple(mask.shape[-2:])} do not match image "
                    f"{tuple(img.shape[-2:])}"
                )
            x = torch.cat([img, mask.to(img.dtype)], dim=1)
        else:
            x = img
        down = F.avg_pool2d(x, kernel_size=2, stride=2)
        return [self.full_scale(x), self.half_scale(down)]


def discriminate(img, mask, disc: MultiScaleDiscriminator):
    """Spec-surface alias: per-scale {logit map, feature list}."""
    return disc(img, mask)
