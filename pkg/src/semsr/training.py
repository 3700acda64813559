"""End-to-end adversarial training of encoder + generator + discriminator.

One discriminator update then one generator+encoder update per step, hinge
objectives, feature matching and perceptual terms on the generator side,
uniform noise injected into the style matrix before generation. All
randomness flows through the state's numpy generator (plus the torch seed
at build time), so runs are reproducible and checkpoints resume bit-exactly.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .config import ModelConfig
from .data import GuidePool, augment_pair, make_pair, sample_guide
from .discriminator import MultiScaleDiscriminator
from .generator import Generator
from .losses import adv_loss_d, adv_loss_g, feat_match_loss, perceptual_loss, total_loss
from .resample import bicubic_resample
from .style import StyleEncoder, inject_noise_t, trivial_mask_t
from .types import ValidationError

log = logging.getLogger(__name__)

ABLATION_PRESETS = {
    # name: (use_semantics, use_lr_style, use_hr_style)
    "prior-only": (False, False, False),
    "lr-style-only": (False, True, False),
    "hr-style-only": (False, False, True),
    "semantics-only": (True, False, False),
    "independent": (True, True, False),
    "guided": (True, True, True),
}


def make_ablation_config(name: str, **overrides) -> ModelConfig:
    """Config preset for one row of the component ablation grid."""
    key = name.strip().lower().replace("_", "-").replace(" ", "-")
    if key not in ABLATION_PRESETS:
        raise ValidationError(
            f"unknown ablation {name!r}; valid names: {sorted(ABLATION_PRESETS)}"
        )
    sem, lr_style, hr_style = ABLATION_PRESETS[key]
    variant = "guided" if hr_style else "independent"
    fields = dict(use_semantics=sem, use_lr_style=lr_style,
                  use_hr_style=hr_style, variant=variant)
    fields.update(overrides)
    return ModelConfig(**fields)


class TrainingDiverged(RuntimeError):
    """A loss went non-finite; diagnostics were dumped."""


@dataclass
class TrainState:
    config: ModelConfig
    generator: Generator
    style_encoder: StyleEncoder
    discriminator: MultiScaleDiscriminator
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    rng: np.random.Generator
    step: int = 0
    epoch: int = 0
    running: dict = field(default_factory=dict)


def build_state(config: ModelConfig) -> TrainState:
    torch.manual_seed(config.seed)
    generator = Generator(config)
    style_encoder = StyleEncoder(config)
    discriminator = MultiScaleDiscriminator(config)
    g_params = list(generator.parameters()) + list(style_encoder.parameters())
    opt_g = torch.optim.Adam(g_params, lr=config.g_lr, betas=config.adam_betas)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=config.d_lr,
                             betas=config.adam_betas)
    return TrainState(
        config=config,
        generator=generator,
        style_encoder=style_encoder,
        discriminator=discriminator,
        opt_g=opt_g,
        opt_d=opt_d,
        rng=np.random.default_rng(config.seed),
    )


def _style_for_batch(state: TrainState, batch: dict) -> Optional[torch.Tensor]:
    """Encode the style matrix per the configured source, or None."""
    cfg = state.config
    if not cfg.use_style:
        return None
    if cfg.use_hr_style:
        img, mask = batch["guide"], batch["guide_mask"]
        path = "hr"
    else:
        img, mask = batch["x_lr"], batch["mask"]
        path = "lr"
    if not cfg.use_semantics or mask is None:
        b, _, h, w = img.shape
        mask = trivial_mask_t(b, cfg.n_regions, h, w, dtype=img.dtype)
    return state.style_encoder(img, mask, path)


def _gen_mask(batch: dict, cfg: ModelConfig) -> Optional[torch.Tensor]:
    return batch["mask"] if cfg.use_semantics else None


def _patch_accuracy(real_outs, fake_outs) -> float:
    correct = 0
    total = 0
    for (r_logits, _), (f_logits, _) in zip(real_outs, fake_outs):
        correct += int((r_logits > 0).sum()) + int((f_logits < 0).sum())
        total += r_logits.numel() + f_logits.numel()
    return correct / max(total, 1)


def train_step(state: TrainState, batch: dict, config: ModelConfig,
               perceptual_extractor, dump_dir=None):
    """One D update then one G+E update. Returns (state, metrics)."""
    gen, enc, disc = state.generator, state.style_encoder, state.discriminator
    x_lr, x_hr = batch["x_lr"], batch["x_hr"]
    gen_mask = _gen_mask(batch, config)
    disc_mask = batch["mask"] if config.use_semantics else None

    # Discriminator phase (generator/encoder frozen).
    with torch.no_grad():
        style = _style_for_batch(state, batch)
        if style is not None:
            style = inject_noise_t(style, config.noise_delta, state.rng)
        fake = gen(x_lr, gen_mask, style)
    real_outs = disc(x_hr, disc_mask)
    fake_outs = disc(fake, disc_mask)
    loss_d = adv_loss_d([lo for lo, _ in real_outs], [lo for lo, _ in fake_outs])
    state.opt_d.zero_grad()
    loss_d.backward()
    state.opt_d.step()
    patch_acc = _patch_accuracy(real_outs, fake_outs)

    # Generator + encoder phase.
    style = _style_for_batch(state, batch)
    if style is not None:
        style = inject_noise_t(style, config.noise_delta, state.rng)
    fake = gen(x_lr, gen_mask, style)
    fake_outs = disc(fake, disc_mask)
    with torch.no_grad():
        real_outs = disc(x_hr, disc_mask)
    loss_adv = adv_loss_g([lo for lo, _ in fake_outs])
    loss_feat = feat_match_loss(
        [[f.detach() for f in feats] for _, feats in real_outs],
        [feats for _, feats in fake_outs],
    )
    loss_vgg = perceptual_loss(fake, x_hr, perceptual_extractor)
    loss_g = total_loss(loss_adv, loss_feat, loss_vgg, config)
    state.opt_g.zero_grad()
    loss_g.backward()
    state.opt_g.step()

    metrics = {
        "step": state.step,
        "loss_d": float(loss_d.item()),
        "loss_g": float(loss_g.item()),
        "loss_adv": float(loss_adv.item()),
        "loss_feat": float(loss_feat.item()),
        "loss_vgg": float(loss_vgg.item()),
        "patch_acc": patch_acc,
    }
    if not all(math.isfinite(v) for v in metrics.values()):
        dump = {
            "metrics": metrics,
            "weight_norms": {
                "generator": float(sum(p.detach().abs().sum() for p in gen.parameters())),
                "style_encoder": float(sum(p.detach().abs().sum() for p in enc.parameters())),
                "discriminator": float(sum(p.detach().abs().sum() for p in disc.parameters())),
            },
        }
        if dump_dir is not None:
            Path(dump_dir).mkdir(parents=True, exist_ok=True)
            with open(Path(dump_dir) / f"diverged_step{state.step}.json", "w") as fh:
                json.dump(dump, fh, indent=2)
        raise TrainingDiverged(f"non-finite loss at step {state.step}: {metrics}")

    state.step += 1
    for k, v in metrics.items():
        if k != "step":
            prev = state.running.get(k, v)
            state.running[k] = 0.9 * prev + 0.1 * v
    return state, metrics


def batches_from_records(records, config: ModelConfig, rng: np.random.Generator,
                         *, augment: bool = True, guide_pool=None,
                         dtype=torch.float32):
    """Yield seeded-deterministic batches for one epoch."""
    order = rng.permutation(len(records))
    bs = config.batch_size
    for start in range(0, len(order) - bs + 1, bs):
        chunk = [records[int(i)] for i in order[start:start + bs]]
        yield build_batch(chunk, config, rng, augment=augment,
                          guide_pool=guide_pool, dtype=dtype)


def build_batch(records, config: ModelConfig, rng: np.random.Generator,
                *, augment: bool = True, guide_pool=None, dtype=torch.float32):
    xs_lr, xs_hr, masks, guides, guide_masks = [], [], [], [], []
    need_guide = config.use_hr_style
    for rec in records:
        x_lr, x_hr, mask = make_pair(rec, config.scale,
                                     require_mask=config.use_semantics)
        flip = bool(augment and rng.random() < 0.5)
        x_lr, x_hr, mask = augment_pair(x_lr, x_hr, mask, flip)
        xs_lr.append(torch.from_numpy(x_lr.data))
        xs_hr.append(torch.from_numpy(x_hr.data))
        if mask is not None:
            masks.append(torch.from_numpy(mask.data.astype(np.float32)))
        if need_guide:
            if guide_pool is None:
                raise ValidationError("guided training requires a guide pool")
            guide = sample_guide(rec, guide_pool, rng)
            g_lr, g_hr, g_mask = make_pair(guide.record, config.scale,
                                           require_mask=False)
            guides.append(torch.from_numpy(g_hr.data))
            if g_mask is not None:
                guide_masks.append(torch.from_numpy(g_mask.data.astype(np.float32)))
    batch = {
        "x_lr": torch.stack(xs_lr).to(dtype),
        "x_hr": torch.stack(xs_hr).to(dtype),
        "mask": torch.stack(masks).to(dtype) if len(masks) == len(records) else None,
        "guide": torch.stack(guides).to(dtype) if guides else None,
        "guide_mask": (torch.stack(guide_masks).to(dtype)
                       if len(guide_masks) == len(records) else None),
    }
    return batch


def save_train_state(state: TrainState, path) -> None:
    payload = {
        "version": 1,
        "kind": "train_state",
        "config": state.config.to_json(),
        "step": state.step,
        "epoch": state.epoch,
        "generator": state.generator.state_dict(),
        "style_encoder": state.style_encoder.state_dict(),
        "discriminator": state.discriminator.state_dict(),
        "opt_g": state.opt_g.state_dict(),
        "opt_d": state.opt_d.state_dict(),
        "rng_state": state.rng.bit_generator.state,
        "torch_rng": torch.get_rng_state(),
        "running": state.running,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_train_state(path) -> TrainState:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != "train_state":
        raise ValidationError(f"not a training checkpoint: {path}")
    config = ModelConfig.from_json(payload["config"])
    state = build_state(config)
    state.generator.load_state_dict(payload["generator"])
    state.style_encoder.load_state_dict(payload["style_encoder"])
    state.discriminator.load_state_dict(payload["discriminator"])
    state.opt_g.load_state_dict(payload["opt_g"])
    state.opt_d.load_state_dict(payload["opt_d"])
    state.rng.bit_generator.state = payload["rng_state"]
    torch.set_rng_state(payload["torch_rng"])
    state.step = payload["step"]
    state.epoch = payload["epoch"]
    state.running = dict(payload.get("running", {}))
    return state


def train(records, config: ModelConfig, perceptual_extractor, out_dir,
          *, max_steps: Optional[int] = None, resume: Optional[str] = None,
          checkpoint_every: int = 250, log_every: int = 10,
          augment: bool = True, segmentation=None) -> TrainState:
    """Training driver: epochs of seeded batches, ndjson metrics log,
    periodic checkpoints, final inference bundle."""
    from .checkpoint import save_bundle

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if resume:
        state = load_train_state(resume)
        if state.config != config:
            log.warning("resume config differs from requested; using checkpoint's")
        config = state.config
    else:
        state = build_state(config)
    guide_pool = GuidePool(records) if config.use_hr_style else None
    if guide_pool is not None and len(guide_pool) == 0:
        raise ValidationError("guided training requires identity-keyed records")

    stop = False
    with open(out / "metrics.ndjson", "a") as metrics_log:
        while state.epoch < config.epochs and not stop:
            for batch in batches_from_records(records, config, state.rng,
                                              augment=augment,
                                              guide_pool=guide_pool):
                state, metrics = train_step(state, batch, config,
                                            perceptual_extractor, dump_dir=out)
                metrics_log.write(json.dumps(metrics) + "\n")
                if log_every and state.step % log_every == 0:
                    metrics_log.flush()
                    log.info(
                        "step %d d=%.3f g=%.3f acc=%.2f", state.step,
                        metrics["loss_d"], metrics["loss_g"], metrics["patch_acc"],
                    )
                if checkpoint_every and state.step % checkpoint_every == 0:
                    save_train_state(state, out / "train_state.pt")
                if max_steps is not None and state.step >= max_steps:
                    stop = True
                    break
            else:
                state.epoch += 1

    save_train_state(state, out / "train_state.pt")
    save_bundle(out / "model.pt", config, state.generator, state.style_encoder,
                discriminator=state.discriminator, segmentation=segmentation,
                extra={"step": state.step, "epoch": state.epoch})
    return state


def default_style_for(bundle, x_lr, mask, guide=None, guide_mask=None):
    """The deployment default style source: LR self-encoding for the
    independent variant, guide encoding for the guided one."""
    from .style import encode

    cfg = bundle.config
    if cfg.use_hr_style:
        if guide is None:
            raise ValidationError("guided checkpoints need a guide image")
        return encode(guide, guide_mask, "hr", bundle.style_encoder)
    if cfg.use_lr_style:
        return encode(x_lr, mask, "lr", bundle.style_encoder)
    return None


def bicubic_baseline(x_hr, scale: int):
    """Down-then-up bicubic reconstruction used as the reference row."""
    lr = bicubic_resample(x_hr, x_hr.height // scale, x_hr.width // scale)
    return bicubic_resample(lr, x_hr.height, x_hr.width)
