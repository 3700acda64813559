"""Face parsing from the low-resolution input.

A compact dilated-convolution encoder-decoder predicts region logits at LR
resolution and bilinearly upsamples them to the output resolution; argmax +
one-hot yields the layout. A pass-through provider serves precomputed masks
so the rest of the pipeline can run without a trained parser.
"""
from __future__ import annotations

import json
import logging
import warnings
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig
from .masks import REGION_NAMES, onehot_encode, resize_mask_nearest
from .types import ImageTensor, SemanticMask, ValidationError

log = logging.getLogger(__name__)


class SegmentationNet(nn.Module):
    """Dilated conv stack emitting per-region logits at input resolution."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        c1, c2, c3, c4 = config.seg_channels
        self.body = nn.Sequential(
            nn.Conv2d(3, c1, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(c1, c2, 3, padding=2, dilation=2), nn.LeakyReLU(0.2),
            nn.Conv2d(c2, c3, 3, padding=4, dilation=4), nn.LeakyReLU(0.2),
            nn.Conv2d(c3, c4, 3, padding=2, dilation=2), nn.LeakyReLU(0.2),
        )
        self.head = nn.Conv2d(c4, config.n_regions, 1)
        self.trained = False

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        return self.head(self.body(img))

    def logits_at(self, img: torch.Tensor, out_h: int, out_w: int) -> torch.Tensor:
        logits = self(img)
        return F.interpolate(logits, size=(out_h, out_w), mode="bilinear",
                             align_corners=False)


def predict_mask(x_lr: ImageTensor, net: SegmentationNet, target_res: int,
                 region_names: tuple = REGION_NAMES) -> SemanticMask:
    """Argmax layout at target_res x target_res from the LR image."""
    if target_res < 1:
        raise ValidationError("target_res must be >= 1")
    if target_res % x_lr.height != 0:
        raise ValidationError(
            f"target_res {target_res} is not a multiple of the LR height {x_lr.height}"
        )
    if not net.trained:
        warnings.warn("segmentation weights are untrained; mask will be arbitrary")
    with torch.no_grad():
        img = torch.from_numpy(x_lr.data).unsqueeze(0)
        logits = net.logits_at(img, target_res, target_res)[0]
        labels = logits.argmax(dim=0).numpy().astype(np.int64)
    names = region_names if len(region_names) == logits.shape[0] else ()
    return onehot_encode(labels, logits.shape[0], names)


class MaskProvider:
    """Serves layouts either from the parser or from precomputed label maps."""

    def __init__(self, net: SegmentationNet | None = None):
        self.net = net

    def mask_for(self, x_lr: ImageTensor, target_res: int,
                 precomputed: SemanticMask | None = None) -> SemanticMask:
        if precomputed is not None:
            if precomputed.height == target_res and precomputed.width == target_res:
                return precomputed
            return resize_mask_nearest(precomputed, target_res, target_res)
        if self.net is None:
            raise ValidationError(
                "no segmentation weights and no precomputed mask provided"
            )
        return predict_mask(x_lr, self.net, target_res)


def train_seg(manifest_records, config: ModelConfig, *, steps: int | None = None,
              epochs: int = 1, lr: float = 2e-4, out_dir=None,
              log_every: int = 25, seed: int | None = None,
              val_records=None, val_every: int = 100):
    """Train the parser with per-pixel cross-entropy against label maps.

    Returns (net, history). History rows carry step/loss; when val_records
    are given, a val_accuracy row lands every val_every steps (the accuracy
    curve). Everything is also written to out_dir when given.
    """
    from .data import make_pair

    records = [r for r in manifest_records if r.label_map is not None]
    if not records:
        raise ValidationError("training requires records with label maps")
    seed = config.seed if seed is None else seed
    torch.manual_seed(seed)
    net = SegmentationNet(config)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    order_rng = np.random.default_rng(seed)
    history = []

    def record_val(at_step):
        if not val_records:
            return
        net.trained = True  # suppress the untrained warning during eval
        acc = pixel_accuracy(net, val_records, config)
        net.trained = False
        history.append({"step": at_step, "val_accuracy": acc})
        log.info("seg step %d val accuracy %.4f", at_step, acc)

    step = 0
    done = False
    for _ in range(epochs):
        for idx in order_rng.permutation(len(records)):
            rec = records[int(idx)]
            x_lr, x_hr, mask = make_pair(rec, config.scale, require_mask=True)
            img = torch.from_numpy(x_lr.data).unsqueeze(0)
            target = torch.from_numpy(
                np.argmax(mask.data, axis=0).astype(np.int64)
            ).unsqueeze(0)
            logits = net.logits_at(img, x_hr.height, x_hr.width)
            loss = F.cross_entropy(logits, target)
            opt.zero_grad()
            loss.backward()
            opt.step()
            history.append({"step": step, "loss": float(loss.item())})
            if log_every and step % log_every == 0:
                log.info("seg step %d loss %.4f", step, loss.item())
            step += 1
            if val_every and step % val_every == 0:
                record_val(step)
            if steps is not None and step >= steps:
                done = True
                break
        if done:
            break
    record_val(step)
    net.trained = True
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_seg(net, config, out / "seg.pt")
        with open(out / "seg_history.jsonl", "w") as fh:
            for row in history:
                fh.write(json.dumps(row) + "\n")
    return net, history


def pixel_accuracy(net: SegmentationNet, records, config: ModelConfig) -> float:
    """Mean per-pixel accuracy of predicted layouts against ground truth."""
    from .data import make_pair

    correct = 0
    total = 0
    for rec in records:
        x_lr, x_hr, mask = make_pair(rec, config.scale, require_mask=True)
        pred = predict_mask(x_lr, net, x_hr.height)
        truth = np.argmax(mask.data, axis=0)
        guess = np.argmax(pred.data, axis=0)
        correct += int((guess == truth).sum())
        total += truth.size
    return correct / max(total, 1)


SEG_CHECKPOINT_VERSION = 1


def save_seg(net: SegmentationNet, config: ModelConfig, path) -> None:
    torch.save({
        "version": SEG_CHECKPOINT_VERSION,
        "kind": "segmentation",
        "config": config.to_json(),
        "state": net.state_dict(),
        "trained": net.trained,
    }, path)


def load_seg(path) -> tuple[SegmentationNet, ModelConfig]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("version") != SEG_CHECKPOINT_VERSION or payload.get("kind") != "segmentation":
        raise ValidationError(f"not a segmentation checkpoint: {path}")
    config = ModelConfig.from_json(payload["config"])
    net = SegmentationNet(config)
    net.load_state_dict(payload["state"])
    net.trained = bool(payload.get("trained", False))
    return net, config
