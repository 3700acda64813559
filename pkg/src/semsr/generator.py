"""The upscaling generator.

The LR image enters as the literal first feature map (one convolution), a
couple of extra residual blocks run at LR resolution, then log2(scale)
blocks each double the resolution with nearest-neighbor interpolation. All
residual blocks modulate their normalized activations from the semantic
layout and/or the per-region style matrix; a final convolution + tanh lands
in [-1, 1].
"""
from __future__ import annotations

import logging
import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig
from .style import broadcast_style_t, resize_mask_t, trivial_mask_t
from .types import ImageTensor, SemanticMask, StyleMatrix, ValidationError

log = logging.getLogger(__name__)

NORM_EPS = 1e-5


def feature_normalize(x: torch.Tensor, eps: float = NORM_EPS) -> torch.Tensor:
    """Parameter-free batch-style normalization over (batch, H, W) per channel."""
    mean = x.mean(dim=(0, 2, 3), keepdim=True)
    var = x.var(dim=(0, 2, 3), keepdim=True, unbiased=False)
    return (x - mean) / torch.sqrt(var + eps)


class _ModulationNet(nn.Module):
    """Small conv net mapping a conditioning map to per-pixel gamma/beta."""

    def __init__(self, in_channels, out_channels, hidden, kernel):
        super().__init__()
        pad = kernel // 2
        self.shared = nn.Conv2d(in_channels, hidden, kernel, padding=pad)
        self.gamma = nn.Conv2d(hidden, out_channels, kernel, padding=pad)
        self.beta = nn.Conv2d(hidden, out_channels, kernel, padding=pad)

    def forward(self, cond):
        h = F.relu(self.shared(cond))
        return self.gamma(h), self.beta(h)


class SpadeNorm(nn.Module):
    """y = normalize(x) * (1 + gamma(M)) + beta(M)."""

    def __init__(self, channels, n_regions, hidden=128, kernel=3):
        super().__init__()
        self.mask_net = _ModulationNet(n_regions, channels, hidden, kernel)

    def forward(self, x, mask):
        if mask.shape[-2:] != x.shape[-2:]:
            raise ValidationError(
                f"mask dims {tuple(mask.shape[-2:])} do not match features "
                f"{tuple(x.shape[-2:])}"
            )
        gamma, beta = self.mask_net(mask.to(x.dtype))
        return feature_normalize(x) * (1.0 + gamma) + beta


class RegionStyleNorm(nn.Module):
    """SPADE extended with a per-region style path.

    y = normalize(x) * (1 + a*gamma_s + (1-a)*gamma_m) + a*beta_s + (1-a)*beta_m
    with a = alpha clamped to [0, 1], learned per layer. With only one path
    enabled the other's terms vanish (a pinned to 1 or 0 respectively).
    """

    def __init__(self, channels, n_regions, style_dim, hidden=128, kernel=3,
                 use_semantics=True, use_style=True):
        super().__init__()
        if not (use_semantics or use_style):
            raise ValidationError("at least one modulation path must be enabled")
        self.use_semantics = use_semantics
        self.use_style = use_style
        self.mask_net = (
            _ModulationNet(n_regions, channels, hidden, kernel) if use_semantics else None
        )
        self.style_net = (
            _ModulationNet(style_dim, channels, hidden, kernel) if use_style else None
        )
        if use_semantics and use_style:
            self.alpha = nn.Parameter(torch.tensor(0.5))
        else:
            self.alpha = None

    def forward(self, x, mask, style):
        if mask.shape[-2:] != x.shape[-2:]:
            raise ValidationError(
                f"mask dims {tuple(mask.shape[-2:])} do not match features "
                f"{tuple(x.shape[-2:])}"
            )
        xn = feature_normalize(x)
        if self.use_style:
            style_map = broadcast_style_t(style.to(x.dtype), mask.to(x.dtype))
            gamma_s, beta_s = self.style_net(style_map)
        if self.use_semantics:
            gamma_m, beta_m = self.mask_net(mask.to(x.dtype))
        if self.use_semantics and self.use_style:
            a = self.alpha.clamp(0.0, 1.0)
            gamma = a * gamma_s + (1.0 - a) * gamma_m
            beta = a * beta_s + (1.0 - a) * beta_m
        elif self.use_style:
            gamma, beta = gamma_s, beta_s
        else:
            gamma, beta = gamma_m, beta_m
        return xn * (1.0 + gamma) + beta


class PlainNorm(nn.Module):
    """Unconditional normalization + learned per-channel affine (prior-only)."""

    def __init__(self, channels):
        super().__init__()
        self.gamma = nn.Parameter(torch.zeros(channels))
        self.beta = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        g = self.gamma.view(1, -1, 1, 1)
        b = self.beta.view(1, -1, 1, 1)
        return feature_normalize(x) * (1.0 + g) + b


class ModResBlock(nn.Module):
    """Residual block with modulated normalization on every conv path."""

    def __init__(self, c_in, c_out, config: ModelConfig):
        super().__init__()
        c_mid = min(c_in, c_out)
        self.learned_shortcut = c_in != c_out
        self.conv1 = nn.Conv2d(c_in, c_mid, 3, padding=1)
        self.conv2 = nn.Conv2d(c_mid, c_out, 3, padding=1)
        self.norm1 = self._make_norm(c_in, config)
        self.norm2 = self._make_norm(c_mid, config)
        if self.learned_shortcut:
            self.conv_s = nn.Conv2d(c_in, c_out, 1, bias=False)
            self.norm_s = self._make_norm(c_in, config)

    @staticmethod
    def _make_norm(channels, config: ModelConfig):
        if config.use_style:
            return RegionStyleNorm(
                channels, config.n_regions, config.style_dim,
                hidden=config.mod_hidden, kernel=config.mod_kernel,
                use_semantics=config.use_semantics, use_style=True,
            )
        if config.use_semantics:
            return SpadeNorm(channels, config.n_regions,
                             hidden=config.mod_hidden, kernel=config.mod_kernel)
        return PlainNorm(channels)

    def _apply_norm(self, norm, x, mask, style):
        if isinstance(norm, RegionStyleNorm):
            return norm(x, mask, style)
        if isinstance(norm, SpadeNorm):
            return norm(x, mask)
        return norm(x)

    def forward(self, x, mask, style):
        dx = self.conv1(F.leaky_relu(self._apply_norm(self.norm1, x, mask, style), 0.2))
        dx = self.conv2(F.leaky_relu(self._apply_norm(self.norm2, dx, mask, style), 0.2))
        if self.learned_shortcut:
            sx = self.conv_s(self._apply_norm(self.norm_s, x, mask, style))
        else:
            sx = x
        return sx + dx


class Generator(nn.Module):
    """Maps (x_lr, layout, style) to the upscaled image."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        n_up = int(math.log2(config.scale))
        widths = [max(config.min_channels, config.base_channels >> i)
                  for i in range(n_up + 1)]
        self.first = nn.Conv2d(3, widths[0], 3, padding=1)
        blocks = []
        self.block_upsamples = []
        for _ in range(config.n_extra_blocks):
            blocks.append(ModResBlock(widths[0], widths[0], config))
            self.block_upsamples.append(False)
        for i in range(n_up):
            blocks.append(ModResBlock(widths[i], widths[i + 1], config))
            self.block_upsamples.append(True)
        self.blocks = nn.ModuleList(blocks)
        self.last = nn.Conv2d(widths[-1], 3, 3, padding=1)

    def forward(self, x_lr: torch.Tensor, mask=None, style=None) -> torch.Tensor:
        """(B,3,h,w) [+ (B,N,H,W) mask, (B,N,d) style] -> (B,3,H,W) in [-1,1]."""
        cfg = self.config
        b, _, h_lr, w_lr = x_lr.shape
        h_hr, w_hr = h_lr * cfg.scale, w_lr * cfg.scale

        if cfg.use_semantics:
            if mask is None:
                raise ValidationError("this configuration requires a semantic layout")
            if mask.shape[-2:] != (h_hr, w_hr):
                raise ValidationError(
                    f"mask {tuple(mask.shape[-2:])} must be at output resolution "
                    f"({h_hr}, {w_hr})"
                )
        elif mask is not None:
            log.warning("semantics path disabled; ignoring provided mask")
        if cfg.use_style:
            if style is None:
                raise ValidationError("this configuration requires a style matrix")
            if style.shape[-2:] != (cfg.n_regions, cfg.style_dim):
                raise ValidationError(
                    f"style shape {tuple(style.shape[-2:])} must be "
                    f"({cfg.n_regions}, {cfg.style_dim})"
                )
        elif style is not None:
            log.warning("style path disabled; ignoring provided style matrix")

        if cfg.use_semantics:
            cond_mask = mask.to(x_lr.dtype)
        elif cfg.use_style:
            cond_mask = trivial_mask_t(b, cfg.n_regions, h_hr, w_hr,
                                       dtype=x_lr.dtype, device=x_lr.device)
        else:
            cond_mask = None
        cond_style = style.to(x_lr.dtype) if cfg.use_style else None

        h = self.first(x_lr)
        for block, upsample in zip(self.blocks, self.block_upsamples):
            if upsample:
                h = F.interpolate(h, scale_factor=2, mode="nearest")
            m = (resize_mask_t(cond_mask, h.shape[-2], h.shape[-1])
                 if cond_mask is not None else None)
            h = block(h, m, cond_style)
        return torch.tanh(self.last(F.leaky_relu(h, 0.2)))


def render(generator: Generator, x_lr: ImageTensor, mask: SemanticMask | None,
           style: StyleMatrix | None) -> ImageTensor:
    """Single-image inference wrapper over core value types."""
    was_training = generator.training
    generator.eval()
    try:
        with torch.no_grad():
            x = torch.from_numpy(x_lr.data).unsqueeze(0)
            m = (torch.from_numpy(mask.data.astype(np.float32)).unsqueeze(0)
                 if mask is not None else None)
            s = (torch.from_numpy(style.data).unsqueeze(0)
                 if style is not None else None)
            out = generator(x, m, s)[0].numpy()
    finally:
        if was_training:
            generator.train()
    return ImageTensor(data=out)
