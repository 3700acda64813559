"""Procedural face-like test corpus.

Generates small portraits (ellipse head, eyes, brows, nose, lips, hair,
background gradient) plus exact label maps, so the full pipeline can train
and evaluate at desk scale without any external dataset. Deterministic
given the seed.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import DatasetRecord, write_manifest
from .masks import REGION_NAMES, onehot_encode, save_mask_png
from .types import ImageTensor, save_image

_R = {name: i for i, name in enumerate(REGION_NAMES)}


def synth_face(seed: int, size: int = 128, variation: int = 0):
    """One synthetic portrait. Returns (ImageTensor, label map HxW).

    `seed` fixes the person (geometry + face palette); `variation` only
    moves the background and lighting, so records sharing a seed read as
    the same identity.
    """
    rng = np.random.default_rng(seed)
    vrng = np.random.default_rng((seed, variation))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size

    labels = np.full((size, size), _R["background"], dtype=np.int64)

    cx = 0.5 + rng.uniform(-0.05, 0.05)
    cy = 0.52 + rng.uniform(-0.04, 0.04)
    rx = 0.28 + rng.uniform(-0.04, 0.06)
    ry = 0.36 + rng.uniform(-0.04, 0.06)
    face = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0

    hair_top = cy - ry * (0.55 + rng.uniform(0.0, 0.25))
    hair = ((xx - cx) / (rx * 1.25)) ** 2 + ((yy - cy) / (ry * 1.18)) ** 2 <= 1.0
    hair &= yy < hair_top + 0.22 * (1.0 + rng.uniform(-0.3, 0.3))

    neck = (np.abs(xx - cx) < rx * 0.45) & (yy > cy + ry * 0.8) & (yy < cy + ry * 1.35)
    cloth = yy > cy + ry * 1.1

    labels[cloth] = _R["cloth"]
    labels[neck & ~cloth] = _R["neck"]
    labels[hair] = _R["hair"]
    labels[face] = _R["skin"]
    labels[face & hair & (yy < cy - ry * 0.45)] = _R["hair"]

    eye_dy = cy - ry * 0.18
    eye_dx = rx * (0.42 + rng.uniform(-0.05, 0.05))
    eye_r = rx * (0.13 + rng.uniform(-0.02, 0.03))
    for side, name in ((-1, "left_eye"), (1, "right_eye")):
        ex = cx + side * eye_dx
        eye = ((xx - ex) / eye_r) ** 2 + ((yy - eye_dy) / (eye_r * 0.6)) ** 2 <= 1.0
        labels[eye & face] = _R[name]
        brow = (np.abs(yy - (eye_dy - eye_r * 1.4)) < eye_r * 0.35) & (
            np.abs(xx - ex) < eye_r * 1.3
        )
        labels[brow & face] = _R["left_brow" if side < 0 else "right_brow"]

    nose = (np.abs(xx - cx) < rx * 0.12) & (yy > cy - ry * 0.05) & (yy < cy + ry * 0.28)
    labels[nose & face] = _R["nose"]

    lip_y = cy + ry * 0.5
    lip_w = rx * (0.4 + rng.uniform(-0.05, 0.1))
    upper = (np.abs(xx - cx) < lip_w) & (yy > lip_y - 0.02) & (yy <= lip_y)
    lower = (np.abs(xx - cx) < lip_w) & (yy > lip_y) & (yy < lip_y + 0.025)
    labels[upper & face] = _R["upper_lip"]
    labels[lower & face] = _R["lower_lip"]

    skin_tone = np.array([0.75, 0.55, 0.42]) + rng.uniform(-0.15, 0.2, 3)
    hair_tone = np.array([0.2, 0.12, 0.05]) + rng.uniform(0.0, 0.55, 3)
    bg_a = vrng.uniform(0.1, 0.9, 3)
    bg_b = vrng.uniform(0.1, 0.9, 3)
    palette = {
        _R["background"]: None,
        _R["skin"]: skin_tone,
        _R["nose"]: skin_tone * 0.92,
        _R["left_eye"]: np.array([0.95, 0.95, 0.98]),
        _R["right_eye"]: np.array([0.95, 0.95, 0.98]),
        _R["left_brow"]: hair_tone * 0.7,
        _R["right_brow"]: hair_tone * 0.7,
        _R["mouth"]: np.array([0.5, 0.15, 0.15]),
        _R["upper_lip"]: np.array([0.7, 0.25, 0.3]) + rng.uniform(-0.1, 0.1, 3),
        _R["lower_lip"]: np.array([0.75, 0.3, 0.35]) + rng.uniform(-0.1, 0.1, 3),
        _R["hair"]: hair_tone,
        _R["neck"]: skin_tone * 0.9,
        _R["cloth"]: rng.uniform(0.1, 0.9, 3),
    }

    img = np.zeros((3, size, size), dtype=np.float64)
    t = (xx + yy) / 2.0
    for c in range(3):
        img[c] = bg_a[c] * (1.0 - t) + bg_b[c] * t
    for region, tone in palette.items():
        if tone is None:
            continue
        sel = labels == region
        shade = 1.0 - 0.25 * ((yy - cy) / max(ry, 1e-6)).clip(-1, 1)
        for c in range(3):
            img[c][sel] = np.clip(tone[c] * shade[sel], 0.0, 1.0)

    # Pupils inside the eye whites (kept as eye region in the layout).
    for side in (-1, 1):
        ex = cx + side * eye_dx
        pupil = ((xx - ex) ** 2 + (yy - eye_dy) ** 2) <= (eye_r * 0.35) ** 2
        for c in range(3):
            img[c][pupil & (labels == _R["left_eye" if side < 0 else "right_eye"])] = 0.08

    data = (img * 2.0 - 1.0).astype(np.float32)
    return ImageTensor(data=data), labels


def generate_corpus(out_dir, n: int = 200, size: int = 128, seed: int = 0,
                    identities: int | None = None):
    """Write n synthetic faces + label maps + manifest; returns manifest path.

    When `identities` is given, consecutive images share an identity key
    (guided-variant pairs); otherwise every image is its own identity.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    records = []
    per_identity = max(1, n // identities) if identities else 1
    for i in range(n):
        person = i // per_identity if identities else i
        img, labels = synth_face(seed * 1_000_003 + person, size,
                                 variation=i % per_identity)
        mask = onehot_encode(labels, len(REGION_NAMES), REGION_NAMES)
        img_path = out / "images" / f"{i:05d}.png"
        lab_path = out / "labels" / f"{i:05d}.png"
        save_image(img, img_path)
        save_mask_png(mask, lab_path)
        split = "train" if i < int(n * 0.9) else ("val" if i < int(n * 0.95) else "test")
        records.append(DatasetRecord(
            id=f"{i:05d}",
            hr_image=str(img_path),
            label_map=str(lab_path),
            identity=str(i // per_identity) if identities else str(i),
            split=split,
        ))
    manifest = out / "manifest.jsonl"
    write_manifest(records, manifest)
    return manifest
