"""Semantic layout algebra: one-hot encoding, editing, flipping, PNG IO.

Every operation that returns a SemanticMask preserves the one-hot
invariant; edits only touch pixels inside their stencil.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Union

import numpy as np
from PIL import Image

from .types import SemanticMask, ValidationError

# The 19 CelebAMask-HQ face regions in their standard order (background first).
REGION_NAMES = (
    "background",
    "skin",
    "nose",
    "eye_glasses",
    "left_eye",
    "right_eye",
    "left_brow",
    "right_brow",
    "left_ear",
    "right_ear",
    "mouth",
    "upper_lip",
    "lower_lip",
    "hair",
    "hat",
    "earring",
    "necklace",
    "neck",
    "cloth",
)

N_REGIONS = len(REGION_NAMES)

# Left/right pairs whose channels swap under a horizontal flip.
FLIP_PAIRS = (
    ("left_eye", "right_eye"),
    ("left_brow", "right_brow"),
    ("left_ear", "right_ear"),
)


def onehot_encode(labels: np.ndarray, n_regions: int = N_REGIONS,
                  region_names: tuple = ()) -> SemanticMask:
    """Expand an HxW integer label map into an N-channel one-hot mask."""
    lab = np.asarray(labels)
    if lab.ndim != 2:
        raise ValidationError(f"label map must be H x W, got shape {lab.shape}")
    if not np.issubdtype(lab.dtype, np.integer):
        raise ValidationError(f"label map must be integer, got dtype {lab.dtype}")
    bad = (lab < 0) | (lab >= n_regions)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise ValidationError(
            f"label {int(lab[y, x])} at pixel (y={y}, x={x}) outside [0, {n_regions})"
        )
    data = np.zeros((n_regions,) + lab.shape, dtype=np.uint8)
    np.put_along_axis(data, lab[None].astype(np.int64), 1, axis=0)
    names = region_names or (REGION_NAMES if n_regions == N_REGIONS else ())
    return SemanticMask(data=data, region_names=names)


def onehot_decode(mask: SemanticMask) -> np.ndarray:
    """Collapse a one-hot mask back to an HxW integer label map."""
    return np.argmax(mask.data, axis=0).astype(np.int64)


@dataclass(frozen=True)
class Paint:
    """Assign every pixel under `stencil` (boolean HxW) to `region`."""
    region: int
    stencil: np.ndarray


@dataclass(frozen=True)
class Grow:
    """Dilate `region` by `radius` pixels (4-connected)."""
    region: int
    radius: int


@dataclass(frozen=True)
class Shrink:
    """Erode `region` by `radius` pixels; vacated pixels go to the
    dominant 4-neighbor region."""
    region: int
    radius: int


@dataclass(frozen=True)
class Transfer:
    """Hand all pixels of region `src` over to region `dst`."""
    src: int
    dst: int


MaskEdit = Union[Paint, Grow, Shrink, Transfer]


def brush_stencil(height, width, stroke, radius):
    """Rasterize a brush stroke (list of (y, x) points) into a boolean stencil.

    Consecutive points are joined by stamping a disk along the segment.
    """
    stencil = np.zeros((height, width), dtype=bool)
    pts = [(float(y), float(x)) for y, x in stroke]
    if not pts:
        return stencil
    yy, xx = np.mgrid[0:height, 0:width]
    stamps = []
    for (y0, x0), (y1, x1) in zip(pts, pts[1:] or pts):
        steps = max(1, int(np.hypot(y1 - y0, x1 - x0)) + 1)
        for t in np.linspace(0.0, 1.0, steps + 1):
            stamps.append((y0 + t * (y1 - y0), x0 + t * (x1 - x0)))
    for cy, cx in stamps:
        stencil |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
    return stencil


def _binary_dilate(channel: np.ndarray, radius: int) -> np.ndarray:
    out = channel.astype(bool)
    for _ in range(radius):
        grown = out.copy()
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        out = grown
    return out


def _binary_erode(channel: np.ndarray, radius: int) -> np.ndarray:
    out = channel.astype(bool)
    for _ in range(radius):
        shrunk = out.copy()
        # Border pixels erode against an implicit background outside the frame.
        shrunk[1:, :] &= out[:-1, :]
        shrunk[:-1, :] &= out[1:, :]
        shrunk[:, 1:] &= out[:, :-1]
        shrunk[:, :-1] &= out[:, 1:]
        shrunk[0, :] = False
        shrunk[-1, :] = False
        shrunk[:, 0] = False
        shrunk[:, -1] = False
        out = shrunk
    return out


def _repair_vacated(labels: np.ndarray, vacated: np.ndarray, exclude: int) -> np.ndarray:
    """Assign vacated pixels to the dominant 4-neighbor region.

    The shrunk region itself never votes (otherwise vacated pixels would
    immediately rejoin it). Pixels whose valid neighbors are all vacated
    resolve over repeated passes; ties break toward the lowest region index.
    """
    out = labels.copy()
    pending = vacated.copy()
    h, w = labels.shape
    while pending.any():
        progressed = False
        snapshot = out.copy()
        owned = ~pending
        for y, x in np.argwhere(pending):
            counts = {}
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < h and 0 <= nx < w and owned[ny, nx]:
                    r = int(snapshot[ny, nx])
                    if r != exclude:
                        counts[r] = counts.get(r, 0) + 1
            if counts:
                best = min(r for r, c in counts.items() if c == max(counts.values()))
                out[y, x] = best
                pending[y, x] = False
                progressed = True
        if not progressed:
            # No donor region anywhere near (e.g. eroding a full-frame
            # region against the border); fall back to region 0.
            out[pending] = 0
            break
    return out


def edit_mask(mask: SemanticMask, edit: MaskEdit) -> SemanticMask:
    """Apply one edit command, returning a new, still one-hot mask."""
    n = mask.n_regions
    labels = onehot_decode(mask)

    if isinstance(edit, Paint):
        _check_region(edit.region, n)
        stencil = np.asarray(edit.stencil, dtype=bool)
        if stencil.shape != labels.shape:
            raise ValidationError(
                f"stencil shape {stencil.shape} does not match mask {labels.shape}"
            )
        labels = labels.copy()
        labels[stencil] = edit.region
    elif isinstance(edit, Grow):
        _check_region(edit.region, n)
        if edit.radius < 0:
            raise ValidationError("grow radius must be >= 0")
        grown = _binary_dilate(mask.data[edit.region], edit.radius)
        labels = labels.copy()
        labels[grown] = edit.region
    elif isinstance(edit, Shrink):
        _check_region(edit.region, n)
        if edit.radius < 0:
            raise ValidationError("shrink radius must be >= 0")
        before = mask.data[edit.region].astype(bool)
        after = _binary_erode(before, edit.radius)
        vacated = before & ~after
        labels = _repair_vacated(labels, vacated, exclude=edit.region)
    elif isinstance(edit, Transfer):
        _check_region(edit.src, n)
        _check_region(edit.dst, n)
        labels = labels.copy()
        labels[labels == edit.src] = edit.dst
    else:
        raise ValidationError(f"unknown edit command {edit!r}")

    return onehot_encode(labels, n, mask.region_names)


def _check_region(region: int, n: int) -> None:
    if not 0 <= region < n:
        raise ValidationError(f"region index {region} outside [0, {n})")


def flip_mask(mask: SemanticMask) -> SemanticMask:
    """Mirror horizontally, swapping left/right paired region channels."""
    data = mask.data[:, :, ::-1].copy()
    names = mask.region_names
    for a, b in FLIP_PAIRS:
        if a in names and b in names:
            ia, ib = names.index(a), names.index(b)
            data[[ia, ib]] = data[[ib, ia]]
    return SemanticMask(data=data, region_names=names)


def resize_mask_nearest(mask: SemanticMask, out_h: int, out_w: int) -> SemanticMask:
    """Nearest-neighbor resize; floor index mapping keeps channels one-hot."""
    if out_h < 1 or out_w < 1:
        raise ValidationError("output dims must be >= 1")
    ys = (np.arange(out_h) * mask.height // out_h).clip(0, mask.height - 1)
    xs = (np.arange(out_w) * mask.width // out_w).clip(0, mask.width - 1)
    data = mask.data[:, ys[:, None], xs[None, :]]
    return SemanticMask(data=data, region_names=mask.region_names)


def save_mask_png(mask: SemanticMask, path) -> None:
    """Write the label map as a palette PNG (palette index = region index)."""
    im = Image.fromarray(onehot_decode(mask).astype(np.uint8), mode="P")
    im.putpalette(_palette(mask.n_regions))
    im.save(path, format="PNG")


def encode_mask_png(mask: SemanticMask) -> bytes:
    im = Image.fromarray(onehot_decode(mask).astype(np.uint8), mode="P")
    im.putpalette(_palette(mask.n_regions))
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def load_mask_png(path, n_regions: int = N_REGIONS,
                  region_names: tuple = ()) -> SemanticMask:
    with Image.open(path) as im:
        labels = np.asarray(im.convert("P") if im.mode != "P" else im)
    return onehot_encode(labels.astype(np.int64), n_regions, region_names)


def decode_mask_png(blob: bytes, n_regions: int = N_REGIONS,
                    region_names: tuple = ()) -> SemanticMask:
    with Image.open(io.BytesIO(blob)) as im:
        labels = np.asarray(im.convert("P") if im.mode != "P" else im)
    return onehot_encode(labels.astype(np.int64), n_regions, region_names)


# A fixed, visually distinct palette for the 19 regions (RGB triples).
_BASE_COLORS = [
    (0, 0, 0), (204, 153, 102), (255, 204, 153), (64, 64, 192),
    (255, 255, 255), (224, 224, 224), (102, 51, 0), (153, 76, 0),
    (255, 178, 102), (255, 153, 51), (153, 0, 0), (204, 0, 0),
    (255, 51, 51), (51, 25, 0), (0, 102, 102), (255, 215, 0),
    (192, 192, 192), (229, 184, 143), (0, 76, 153),
]


def _palette(n_regions: int):
    colors = [_BASE_COLORS[i % len(_BASE_COLORS)] for i in range(n_regions)]
    flat = [c for rgb in colors for c in rgb]
    flat += [0] * (768 - len(flat))
    return flat
