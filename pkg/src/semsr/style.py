"""Style extraction and style-space algebra.

The encoder maps an LR or HR image into a shared feature space squashed to
[-1, 1], then collapses it into one style vector per semantic region via
regional average pooling. Everything downstream of the encoder (noise,
interpolation, mixing, sampling) is pure array algebra that only ever
touches the rows it names.
"""
from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig
from .types import ImageTensor, SemanticMask, StyleMatrix, ValidationError


def regional_avg_pool(features: np.ndarray, mask: SemanticMask) -> np.ndarray:
    """Masked mean of C-channel features per region: (C,H,W) x mask -> (N,C).

    Empty regions produce a zero row.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 3:
        raise ValidationError(f"features must be C x H x W, got shape {feats.shape}")
    if feats.shape[1:] != (mask.height, mask.width):
        raise ValidationError(
            f"feature dims {feats.shape[1:]} do not match mask "
            f"{(mask.height, mask.width)}"
        )
    m = mask.data.astype(np.float64)
    counts = m.sum(axis=(1, 2))
    sums = np.einsum("chw,nhw->nc", feats, m)
    out = sums / np.maximum(counts, 1.0)[:, None]
    out[counts == 0] = 0.0
    return out


def broadcast_style(style: StyleMatrix, mask: SemanticMask) -> np.ndarray:
    """Per-pixel style map (d,H,W): pixel owned by region i gets row i."""
    if style.n_regions != mask.n_regions:
        raise ValidationError(
            f"style has {style.n_regions} regions, mask has {mask.n_regions}"
        )
    s = style.data.astype(np.float64)
    m = mask.data.astype(np.float64)
    return np.einsum("nd,nhw->dhw", s, m)


def regional_avg_pool_t(features: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Batched torch pooling: (B,C,H,W) x (B,N,H,W) -> (B,N,C)."""
    if features.shape[-2:] != mask.shape[-2:]:
        raise ValidationError(
            f"feature dims {tuple(features.shape[-2:])} do not match mask "
            f"{tuple(mask.shape[-2:])}"
        )
    m = mask.to(features.dtype)
    counts = m.sum(dim=(2, 3))
    sums = torch.einsum("bchw,bnhw->bnc", features, m)
    out = sums / counts.clamp(min=1.0).unsqueeze(-1)
    return out * (counts > 0).to(features.dtype).unsqueeze(-1)


def broadcast_style_t(style: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Batched torch broadcast: (B,N,d) x (B,N,H,W) -> (B,d,H,W)."""
    return torch.einsum("bnd,bnhw->bdhw", style, mask.to(style.dtype))


def resize_mask_t(mask: torch.Tensor, h: int, w: int) -> torch.Tensor:
    """Nearest-neighbor mask resize (floor index mapping, stays one-hot)."""
    if mask.shape[-2:] == (h, w):
        return mask
    ys = (torch.arange(h, device=mask.device) * mask.shape[-2]) // h
    xs = (torch.arange(w, device=mask.device) * mask.shape[-1]) // w
    return mask[..., ys[:, None], xs[None, :]]


class StyleEncoder(nn.Module):
    """Two-path style encoder with a shared output layer.

    The LR path upsamples once before its last convolutions; the HR path
    strides down twice into a bottleneck and upsamples once after it. Both
    emit `style_dim` channels into the shared convolution, whose tanh output
    lands in [-1, 1] before regional pooling.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        c1, c2, c3 = config.enc_channels
        d = config.style_dim
        self.scale = config.scale
        self.lr_convs = nn.ModuleList([
            nn.Conv2d(3, c1, 3, padding=1),
            nn.Conv2d(c1, c2, 3, padding=1),
            nn.Conv2d(c2, c3, 3, padding=1),
            nn.Conv2d(c3, d, 3, padding=1),
        ])
        self.hr_convs = nn.ModuleList([
            nn.Conv2d(3, c1, 3, padding=1),
            nn.Conv2d(c1, c2, 3, stride=2, padding=1),
            nn.Conv2d(c2, c3, 3, stride=2, padding=1),
            nn.Conv2d(c3, d, 3, padding=1),
        ])
        self.shared = nn.Conv2d(d, d, 3, padding=1)

    def features(self, img: torch.Tensor, path: str) -> torch.Tensor:
        """Shared-space feature map in [-1, 1] for a batch of images."""
        act = lambda t: F.leaky_relu(t, 0.2)
        if path == "lr":
            h = act(self.lr_convs[0](img))
            h = act(self.lr_convs[1](h))
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = act(self.lr_convs[2](h))
            h = act(self.lr_convs[3](h))
        elif path == "hr":
            h = act(self.hr_convs[0](img))
            h = act(self.hr_convs[1](h))
            h = act(self.hr_convs[2](h))
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = act(self.hr_convs[3](h))
        else:
            raise ValidationError(f"path must be 'lr' or 'hr', got {path!r}")
        return torch.tanh(self.shared(h))

    def forward(self, img: torch.Tensor, mask: torch.Tensor, path: str) -> torch.Tensor:
        """(B,3,H,W) + (B,N,H',W') -> (B,N,d) style matrices."""
        feats = self.features(img, path)
        mask_f = resize_mask_t(mask, feats.shape[-2], feats.shape[-1])
        return regional_avg_pool_t(feats, mask_f)


def encode(img: ImageTensor, mask: SemanticMask, path: str,
           encoder: StyleEncoder) -> StyleMatrix:
    """Single-image convenience wrapper around the torch encoder."""
    if path not in ("lr", "hr"):
        raise ValidationError(f"path must be 'lr' or 'hr', got {path!r}")
    if path == "lr":
        expected = (img.height * encoder.scale, img.width * encoder.scale)
    else:
        expected = (img.height, img.width)
    if (mask.height, mask.width) != expected:
        raise ValidationError(
            f"mask {mask.height}x{mask.width} does not match the {path} path's "
            f"expected layout resolution {expected[0]}x{expected[1]}"
        )
    with torch.no_grad():
        img_t = torch.from_numpy(img.data).unsqueeze(0)
        mask_t = torch.from_numpy(mask.data.astype(np.float32)).unsqueeze(0)
        out = encoder(img_t, mask_t, path)[0].numpy()
    return StyleMatrix(np.clip(out, -1.0, 1.0))


def inject_noise(style: StyleMatrix, delta: float,
                 rng: np.random.Generator) -> StyleMatrix:
    """Add Uniform(-delta, +delta) noise entrywise, clamped back to [-1, 1]."""
    if delta < 0:
        raise ValidationError("delta must be >= 0")
    if delta == 0:
        return style
    noise = rng.uniform(-delta, delta, size=style.data.shape)
    return StyleMatrix(np.clip(style.data + noise, -1.0, 1.0).astype(np.float32))


def inject_noise_t(style: torch.Tensor, delta: float,
                   rng: np.random.Generator) -> torch.Tensor:
    """Torch version used in training; noise is constant w.r.t. autograd."""
    if delta < 0:
        raise ValidationError("delta must be >= 0")
    if delta == 0:
        return style
    noise = torch.from_numpy(
        rng.uniform(-delta, delta, size=tuple(style.shape))
    ).to(style.dtype)
    return torch.clamp(style + noise, -1.0, 1.0)


def interpolate(style_a: StyleMatrix, style_b: StyleMatrix, t: float) -> StyleMatrix:
    """Linear blend (1-t)*a + t*b."""
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"t must lie in [0, 1], got {t}")
    if style_a.data.shape != style_b.data.shape:
        raise ValidationError("style shapes differ")
    out = (1.0 - t) * style_a.data.astype(np.float64) + t * style_b.data.astype(np.float64)
    return StyleMatrix(out.astype(np.float32))


def mix(style_base: StyleMatrix, style_src: StyleMatrix, regions) -> StyleMatrix:
    """Copy the named rows from src, keep everything else from base."""
    if style_base.data.shape != style_src.data.shape:
        raise ValidationError("style shapes differ")
    out = style_base.data.copy()
    for r in regions:
        if not 0 <= r < style_base.n_regions:
            raise ValidationError(f"region index {r} outside [0, {style_base.n_regions})")
        out[r] = style_src.data[r]
    return StyleMatrix(out)


def sample_style(rng: np.random.Generator, n_regions: int, style_dim: int) -> StyleMatrix:
    """I.i.d. Uniform(-1, 1) style matrix."""
    return StyleMatrix(rng.uniform(-1.0, 1.0, size=(n_regions, style_dim)).astype(np.float32))


STYLE_MAGIC = b"SSM1"


def save_style(style: StyleMatrix, path) -> None:
    """Row-major float32 binary with a magic + (N, d) header."""
    import struct

    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", STYLE_MAGIC, style.n_regions, style.dim))
        fh.write(np.ascontiguousarray(style.data, dtype="<f4").tobytes())


def load_style(path) -> StyleMatrix:
    import struct

    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12:
            raise ValidationError(f"truncated style file {path}")
        magic, n, d = struct.unpack("<4sII", header)
        if magic != STYLE_MAGIC:
            raise ValidationError(f"not a style matrix file: {path}")
        payload = fh.read(n * d * 4)
    if len(payload) != n * d * 4:
        raise ValidationError(f"style file {path} shorter than its header claims")
    data = np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()
    return StyleMatrix(data)


def style_to_json(style: StyleMatrix) -> str:
    import json

    return json.dumps({"n_regions": style.n_regions, "dim": style.dim,
                       "data": style.data.tolist()})


def style_from_json(text: str) -> StyleMatrix:
    import json

    payload = json.loads(text)
    data = np.asarray(payload["data"], dtype=np.float32)
    if data.shape != (payload["n_regions"], payload["dim"]):
        raise ValidationError("style JSON shape does not match its header")
    return StyleMatrix(data)


def trivial_mask(height: int, width: int, n_regions: int) -> SemanticMask:
    """Single-region layout (everything is region 0): global style fallback
    for configurations that do not use semantics."""
    data = np.zeros((n_regions, height, width), dtype=np.uint8)
    data[0] = 1
    return SemanticMask(data=data)


def trivial_mask_t(batch: int, n_regions: int, height: int, width: int,
                   dtype=torch.float32, device=None) -> torch.Tensor:
    m = torch.zeros(batch, n_regions, height, width, dtype=dtype, device=device)
    m[:, 0] = 1.0
    return m
