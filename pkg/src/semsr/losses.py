"""Training objectives: hinge adversarial, feature matching, perceptual,
and the weighted total.

All loss functions accept either a single tensor or a per-scale list of
tensors and reduce by the mean over scales.
"""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from . import assets
from .config import ModelConfig
from .types import ValidationError

# Stage weights for the five-stage perceptual distance (shallow to deep).
PERCEPTUAL_STAGE_WEIGHTS = (1 / 32, 1 / 16, 1 / 8, 1 / 4, 1.0)

# ImageNet statistics used by the pretrained backbones (inputs in [0, 1]).
_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


def _as_list(logits):
    if isinstance(logits, (list, tuple)):
        return list(logits)
    return [logits]


def adv_loss_d(real_logits, fake_logits) -> torch.Tensor:
    """Hinge loss for the discriminator, averaged over scales and patches."""
    real = _as_list(real_logits)
    fake = _as_list(fake_logits)
    if len(real) != len(fake):
        raise ValidationError(
            f"{len(real)} real logit maps vs {len(fake)} fake"
        )
    real_term = torch.stack([F.relu(1.0 - r).mean() for r in real]).mean()
    fake_term = torch.stack([F.relu(1.0 + f).mean() for f in fake]).mean()
    return real_term + fake_term


def adv_loss_g(fake_logits) -> torch.Tensor:
    """Generator side of the hinge objective: -mean(fake logits)."""
    fake = _as_list(fake_logits)
    return -torch.stack([f.mean() for f in fake]).mean()


def feat_match_loss(real_feats, fake_feats) -> torch.Tensor:
    """L1 between discriminator features of real and fake, averaged over
    all layers of all scales."""
    if isinstance(real_feats[0], torch.Tensor):
        real_feats, fake_feats = [real_feats], [fake_feats]
    if len(real_feats) != len(fake_feats):
        raise ValidationError(
            f"{len(real_feats)} real feature lists vs {len(fake_feats)} fake"
        )
    terms = []
    for scale_real, scale_fake in zip(real_feats, fake_feats):
        if len(scale_real) != len(scale_fake):
            raise ValidationError(
                f"feature list length mismatch: {len(scale_real)} vs {len(scale_fake)}"
            )
        for r, f in zip(scale_real, scale_fake):
            terms.append(F.l1_loss(f, r))
    return torch.stack(terms).mean()


class VGG19Features(nn.Module):
    """Five-stage VGG-19 feature pyramid (relu1_1 .. relu5_1).

    Weights come from the pinned external asset; construction fails with
    download instructions when it is absent. Inputs are expected in [-1, 1].
    """

    SLICES = ((0, 2), (2, 7), (7, 12), (12, 21), (21, 30))

    def __init__(self, state_dict=None):
        super().__init__()
        from torchvision.models import vgg19

        net = vgg19(weights=None)
        if state_dict is None:
            path = assets.require_asset("vgg19")
            state_dict = torch.load(path, map_location="cpu", weights_only=True)
        net.load_state_dict(state_dict)
        features = net.features
        self.stages = nn.ModuleList(
            nn.Sequential(*[features[i] for i in range(a, b)])
            for a, b in self.SLICES
        )
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))

    def forward(self, img):
        h = ((img + 1.0) / 2.0 - self.mean.to(img.dtype)) / self.std.to(img.dtype)
        outs = []
        for stage in self.stages:
            h = stage(h)
            outs.append(h)
        return outs


class TinyFeatureExtractor(nn.Module):
    """Compact five-stage conv pyramid with seeded fixed random weights.

    A self-contained stand-in for the pretrained backbone wherever the
    sandbox has no weight assets (desk-scale runs, tests). Same interface
    and stage count as VGG19Features.
    """

    def __init__(self, channels: int = 16, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        stages = []
        prev = 3
        for i in range(5):
            conv = nn.Conv2d(prev, channels, 3, padding=1,
                             stride=1 if i == 0 else 2)
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen)
                                  * (1.0 / max(prev, 1)) ** 0.5)
                conv.bias.zero_()
            stages.append(conv)
            prev = channels
        self.stages = nn.ModuleList(stages)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, img):
        h = img
        outs = []
        for stage in self.stages:
            h = F.leaky_relu(stage(h), 0.2)
            outs.append(h)
        return outs


def perceptual_loss(fake, real, extractor,
                    stage_weights=PERCEPTUAL_STAGE_WEIGHTS) -> torch.Tensor:
    """Weighted L1 between extractor activations at each stage."""
    if fake.shape != real.shape:
        raise ValidationError(
            f"image shapes differ: {tuple(fake.shape)} vs {tuple(real.shape)}"
        )
    fake_feats = extractor(fake)
    real_feats = extractor(real)
    if len(fake_feats) != len(stage_weights):
        raise ValidationError(
            f"extractor produced {len(fake_feats)} stages for "
            f"{len(stage_weights)} weights"
        )
    total = fake.new_zeros(())
    for w, f, r in zip(stage_weights, fake_feats, real_feats):
        total = total + w * F.l1_loss(f, r)
    return total


def total_loss(adv, feat, vgg, config: ModelConfig) -> torch.Tensor:
    """L = L_adv + lambda_feat * L_feat + lambda_vgg * L_vgg."""
    return adv + config.lambda_feat * feat + config.lambda_vgg * vgg


def build_perceptual_extractor(spec: str = "vgg19"):
    """Extractor factory: 'vgg19' (asset-backed) or 'tiny[:seed]'."""
    if spec == "vgg19":
        return VGG19Features()
    if spec.startswith("tiny"):
        seed = int(spec.split(":", 1)[1]) if ":" in spec else 0
        return TinyFeatureExtractor(seed=seed)
    raise ValidationError(f"unknown perceptual extractor spec {spec!r}")
