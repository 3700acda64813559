"""Separable bicubic resampling, pinned for bit-exact reproducibility.

Algorithm (float64 throughout):
  - cubic kernel with a = -0.5 (Catmull-Rom family),
  - half-pixel center alignment: src = (dst + 0.5) * (in / out) - 0.5,
  - when minifying, the kernel is stretched by the scale factor
    (anti-aliasing): weight_j = k((j - src) / s) with s = max(1, in/out),
    support 2*s on each side,
  - source indices clamped to the frame (border replicate),
  - per-output-pixel weight normalization to sum 1,
  - horizontal pass then vertical pass,
  - final clamp to [-1, 1].
"""
from __future__ import annotations

import numpy as np

from .types import ImageTensor, ValidationError

KERNEL_A = -0.5


def cubic_kernel(x: np.ndarray, a: float = KERNEL_A) -> np.ndarray:
    """The piecewise-cubic interpolation kernel with parameter a."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(ax)
    near = ax <= 1.0
    far = (ax > 1.0) & (ax < 2.0)
    out[near] = (a + 2.0) * ax[near] ** 3 - (a + 3.0) * ax[near] ** 2 + 1.0
    out[far] = a * ax[far] ** 3 - 5.0 * a * ax[far] ** 2 + 8.0 * a * ax[far] - 4.0 * a
    return out


def _axis_weights(in_size: int, out_size: int):
    """Row-normalized (out_size x in_size) weight matrix for one axis."""
    scale = in_size / out_size
    support = max(1.0, scale)
    centers = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    weights = np.zeros((out_size, in_size), dtype=np.float64)
    radius = 2.0 * support
    for i, c in enumerate(centers):
        lo = int(np.ceil(c - radius))
        hi = int(np.floor(c + radius))
        idx = np.arange(lo, hi + 1)
        w = cubic_kernel((idx - c) / support)
        np.add.at(weights[i], np.clip(idx, 0, in_size - 1), w)
        weights[i] /= weights[i].sum()
    return weights


def resample_plane(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bicubic-resample one HxW float64 plane (no clamping)."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    horizontal = _axis_weights(w, out_w)
    vertical = _axis_weights(h, out_h)
    return vertical @ plane @ horizontal.T


def bicubic_resample(img: ImageTensor, out_h: int, out_w: int) -> ImageTensor:
    """Resize to (out_h, out_w) with the pinned anti-aliased bicubic."""
    if out_h < 1 or out_w < 1:
        raise ValidationError(f"output dims must be >= 1, got {out_h}x{out_w}")
    if out_h == img.height and out_w == img.width:
        return img
    planes = [resample_plane(c, out_h, out_w) for c in img.data.astype(np.float64)]
    out = np.clip(np.stack(planes), -1.0, 1.0)
    return ImageTensor(data=out.astype(np.float32), colorspace=img.colorspace)
