"""Dataset ingestion: manifests, LR/HR pairing, guide sampling, augmentation.

Manifests are JSONL, one record per line. Images are PNG/JPEG on disk;
label maps are palette PNGs whose indices are region indices.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .masks import N_REGIONS, REGION_NAMES, flip_mask, load_mask_png
from .resample import bicubic_resample
from .types import ImageTensor, SemanticMask, ValidationError, load_image

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    hr_image: str
    label_map: Optional[str] = None
    identity: Optional[str] = None
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValidationError(f"split must be one of {SPLITS}, got {self.split!r}")


def write_manifest(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec)) + "\n")


def read_manifest(path, split: Optional[str] = None):
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = DatasetRecord(**json.loads(line))
            if split is None or rec.split == split:
                records.append(rec)
    return records


def make_pair(record: DatasetRecord, scale: int, *, require_mask: bool = False):
    """Load (x_lr, x_hr, mask) for one record.

    x_lr is the bicubic downscale of x_hr by `scale`. The mask is None when
    the record has no label map, unless require_mask (training) is set.
    """
    x_hr = load_image(record.hr_image)
    if x_hr.height != x_hr.width:
        raise ValidationError(
            f"record {record.id}: hr image must be square, got "
            f"{x_hr.height}x{x_hr.width}"
        )
    if scale < 1 or x_hr.height % scale != 0:
        raise ValidationError(
            f"record {record.id}: scale {scale} does not divide resolution {x_hr.height}"
        )
    x_lr = bicubic_resample(x_hr, x_hr.height // scale, x_hr.width // scale)
    mask = None
    if record.label_map is not None:
        mask = load_mask_png(record.label_map, N_REGIONS, REGION_NAMES)
        if (mask.height, mask.width) != (x_hr.height, x_hr.width):
            raise ValidationError(
                f"record {record.id}: label map {mask.height}x{mask.width} does not "
                f"match hr image {x_hr.height}x{x_hr.width}"
            )
    elif require_mask:
        raise ValidationError(f"record {record.id} has no label map (required for training)")
    return x_lr, x_hr, mask


@dataclass(frozen=True)
class GuideSample:
    image: ImageTensor
    record: DatasetRecord
    self_guide: bool


class GuidePool:
    """Records grouped by identity, for guided-variant reference sampling."""

    def __init__(self, records):
        self._by_identity = {}
        for rec in records:
            if rec.identity is not None:
                self._by_identity.setdefault(rec.identity, []).append(rec)

    def __len__(self):
        return sum(len(v) for v in self._by_identity.values())

    def sample_guide(self, record: DatasetRecord,
                     rng: Optional[np.random.Generator] = None) -> GuideSample:
        """Pick an HR image of the same identity, preferring a different one.

        Falls back to the record itself (self_guide=True) when the identity
        has no other image.
        """
        if len(self._by_identity) == 0:
            raise ValidationError("guide pool is empty")
        if record.identity is None or record.identity not in self._by_identity:
            raise ValidationError(
                f"record {record.id} has unknown identity {record.identity!r}"
            )
        candidates = [r for r in self._by_identity[record.identity] if r.id != record.id]
        if not candidates:
            return GuideSample(load_image(record.hr_image), record, self_guide=True)
        if rng is not None and len(candidates) > 1:
            chosen = candidates[int(rng.integers(0, len(candidates)))]
        else:
            chosen = candidates[0]
        return GuideSample(load_image(chosen.hr_image), chosen, self_guide=False)


def sample_guide(record: DatasetRecord, pool: GuidePool,
                 rng: Optional[np.random.Generator] = None) -> GuideSample:
    return pool.sample_guide(record, rng)


def flip_image(img: ImageTensor) -> ImageTensor:
    return ImageTensor(img.data[:, :, ::-1].copy(), img.colorspace)


def augment_pair(x_lr: ImageTensor, x_hr: ImageTensor, mask: Optional[SemanticMask],
                 flip: bool):
    """Train-time horizontal flip; paired left/right mask channels swap."""
    if not flip:
        return x_lr, x_hr, mask
    return (
        flip_image(x_lr),
        flip_image(x_hr),
        flip_mask(mask) if mask is not None else None,
    )


# ---------------------------------------------------------------------------
# prepare-data: turn raw dataset layouts into square images + manifests.

# CelebA frames are 178x218; crop the vertical center to a 178x178 square
# (top offset 20) before resizing.
CELEBA_CROP_TOP = 20
CELEBA_CROP_SIZE = 178

# CelebAMask-HQ annotation part names, in region-index order (index = pos+1).
_HQ_ANNO_NAMES = (
    "skin", "nose", "eye_g", "l_eye", "r_eye", "l_brow", "r_brow",
    "l_ear", "r_ear", "mouth", "u_lip", "l_lip", "hair", "hat",
    "ear_r", "neck_l", "neck", "cloth",
)


def _resize_to_square(im: Image.Image, size: int) -> ImageTensor:
    img = ImageTensor.from_uint8(np.asarray(im.convert("RGB")))
    return bicubic_resample(img, size, size)


def _split_for_index(i: int, n: int) -> str:
    # 90/5/5 deterministic split by index.
    if i < int(n * 0.9):
        return "train"
    if i < int(n * 0.95):
        return "val"
    return "test"


def prepare_celeba(src_dir, out_dir, size: int = 128, limit: Optional[int] = None):
    """Center-crop + resize CelebA images, read identities, emit a manifest."""
    src = Path(src_dir)
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    identities = {}
    identity_file = src / "identity_CelebA.txt"
    if identity_file.exists():
        for line in identity_file.read_text().splitlines():
            name, ident = line.split()
            identities[name] = ident
    image_dir = src / "img_align_celeba"
    if not image_dir.is_dir():
        image_dir = src
    names = sorted(p.name for p in image_dir.iterdir()
                   if p.suffix.lower() in (".jpg", ".jpeg", ".png"))
    if limit:
        names = names[:limit]
    records = []
    for i, name in enumerate(names):
        with Image.open(image_dir / name) as im:
            im = im.convert("RGB")
            if im.size == (178, 218):
                im = im.crop((0, CELEBA_CROP_TOP,
                              CELEBA_CROP_SIZE, CELEBA_CROP_TOP + CELEBA_CROP_SIZE))
            img = _resize_to_square(im, size)
        rec_id = Path(name).stem
        dest = out / "images" / f"{rec_id}.png"
        from .types import save_image
        save_image(img, dest)
        records.append(DatasetRecord(
            id=rec_id, hr_image=str(dest), label_map=None,
            identity=identities.get(name), split=_split_for_index(i, len(names)),
        ))
    manifest = out / "manifest.jsonl"
    write_manifest(records, manifest)
    return manifest


def build_hq_label_map(anno_dir, index: int, size: int = 512) -> np.ndarray:
    """Combine CelebAMask-HQ per-part annotation PNGs into one label map."""
    anno = Path(anno_dir)
    labels = np.zeros((size, size), dtype=np.int64)
    folder = anno / str(index // 2000)
    base = str(index).rjust(5, "0")
    for pos, part in enumerate(_HQ_ANNO_NAMES):
        part_file = folder / f"{base}_{part}.png"
        if part_file.exists():
            with Image.open(part_file) as im:
                plane = np.asarray(im.convert("L"))
            labels[plane != 0] = pos + 1
    return labels


def prepare_celebamask_hq(src_dir, out_dir, size: int = 256,
                          limit: Optional[int] = None):
    """Resize CelebA-HQ images, rasterize annotation parts into label maps."""
    src = Path(src_dir)
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    image_dir = src / "CelebA-HQ-img"
    anno_dir = src / "CelebAMask-HQ-mask-anno"
    names = sorted(
        (p for p in image_dir.iterdir() if p.suffix.lower() in (".jpg", ".png")),
        key=lambda p: int(p.stem),
    )
    if limit:
        names = names[:limit]
    from .masks import onehot_encode, resize_mask_nearest, save_mask_png
    from .types import save_image
    records = []
    for i, path in enumerate(names):
        idx = int(path.stem)
        with Image.open(path) as im:
            img = _resize_to_square(im, size)
        labels = build_hq_label_map(anno_dir, idx)
        mask = resize_mask_nearest(
            onehot_encode(labels, N_REGIONS, REGION_NAMES), size, size
        )
        dest_img = out / "images" / f"{idx}.png"
        dest_lab = out / "labels" / f"{idx}.png"
        save_image(img, dest_img)
        save_mask_png(mask, dest_lab)
        records.append(DatasetRecord(
            id=str(idx), hr_image=str(dest_img), label_map=str(dest_lab),
            identity=None, split=_split_for_index(i, len(names)),
        ))
    manifest = out / "manifest.jsonl"
    write_manifest(records, manifest)
    return manifest
