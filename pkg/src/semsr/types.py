"""Core value types shared by every stage of the pipeline.

All three types are immutable after construction and validate their
invariants eagerly, so downstream code can assume well-formed data.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image


class ValidationError(ValueError):
    """Raised when a value violates a domain invariant."""


@dataclass(frozen=True)
class ImageTensor:
    """A C-by-H-by-W real image. Model inputs/outputs live in [-1, 1].

    C=3 for RGB, C=1 for grayscale/feature/label planes. The range is only
    enforced at the uint8 conversion boundary; intermediate feature images
    may exceed it.
    """

    data: np.ndarray
    colorspace: str = "rgb"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValidationError(f"image data must be C x H x W, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("image contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_uint8(cls, pixels: np.ndarray, colorspace: str = "rgb") -> "ImageTensor":
        """Normalize 8-bit pixels (HxW or HxWxC) to [-1, 1]."""
        px = np.asarray(pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        data = px.astype(np.float32).transpose(2, 0, 1) / 127.5 - 1.0
        return cls(data=data, colorspace=colorspace)

    def to_uint8(self) -> np.ndarray:
        """Denormalize to HxWxC uint8, clipping to the valid range."""
        arr = (np.clip(self.data, -1.0, 1.0) + 1.0) * 127.5
        return np.round(arr).astype(np.uint8).transpose(1, 2, 0)

    def clamped(self) -> "ImageTensor":
        return ImageTensor(np.clip(self.data, -1.0, 1.0), self.colorspace)


def load_image(path) -> ImageTensor:
    with Image.open(path) as im:
        return ImageTensor.from_uint8(np.asarray(im.convert("RGB")))


def save_image(img: ImageTensor, path) -> None:
    arr = img.to_uint8()
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)


def encode_image_png(img: ImageTensor) -> bytes:
    arr = img.to_uint8()
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def decode_image_png(blob: bytes) -> ImageTensor:
    with Image.open(io.BytesIO(blob)) as im:
        return ImageTensor.from_uint8(np.asarray(im.convert("RGB")))


@dataclass(frozen=True)
class SemanticMask:
    """One-hot semantic layout: N binary channels over an H x W grid.

    Exactly one channel is active at every pixel.
    """

    data: np.ndarray
    region_names: tuple = ()

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValidationError(f"mask data must be N x H x W, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.isin(arr, (0, 1)).all():
                raise ValidationError("mask entries must be 0 or 1")
            arr = arr.astype(np.uint8)
        elif arr.max(initial=0) > 1:
            raise ValidationError("mask entries must be 0 or 1")
        sums = arr.sum(axis=0)
        if not (sums == 1).all():
            bad = np.argwhere(sums != 1)[0]
            raise ValidationError(
                f"mask is not one-hot at pixel (y={bad[0]}, x={bad[1]}): "
                f"channel sum {int(sums[bad[0], bad[1]])}"
            )
        names = tuple(self.region_names) if self.region_names else tuple(
            f"region_{i}" for i in range(arr.shape[0])
        )
        if len(names) != arr.shape[0]:
            raise ValidationError(
                f"{len(names)} region names for {arr.shape[0]} channels"
            )
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "region_names", names)

    @property
    def n_regions(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def region_index(self, name: str) -> int:
        try:
            return self.region_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown region name {name!r}") from None


@dataclass(frozen=True)
class StyleMatrix:
    """N region style vectors of size d, entries in [-1, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"style data must be N x d, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("style matrix contains non-finite values")
        if np.abs(arr).max(initial=0.0) > 1.0:
            raise ValidationError("style entries must lie in [-1, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def n_regions(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]
