"""Single-file checkpoint archives with the config embedded."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch

from .config import ModelConfig
from .discriminator import MultiScaleDiscriminator
from .generator import Generator
from .segmentation import SegmentationNet
from .style import StyleEncoder
from .types import ValidationError

CHECKPOINT_VERSION = 1


@dataclass
class ModelBundle:
    """The inference-facing trio (+ optional parser) for one config."""

    config: ModelConfig
    generator: Generator
    style_encoder: StyleEncoder
    segmentation: Optional[SegmentationNet] = None

    def eval(self):
        self.generator.eval()
        self.style_encoder.eval()
        if self.segmentation is not None:
            self.segmentation.eval()
        return self


def save_bundle(path, config: ModelConfig, generator: Generator,
                style_encoder: StyleEncoder,
                discriminator: Optional[MultiScaleDiscriminator] = None,
                segmentation: Optional[SegmentationNet] = None,
                extra: Optional[dict] = None) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "kind": "model",
        "config": config.to_json(),
        "generator": generator.state_dict(),
        "style_encoder": style_encoder.state_dict(),
    }
    if discriminator is not None:
        payload["discriminator"] = discriminator.state_dict()
    if segmentation is not None:
        payload["segmentation"] = segmentation.state_dict()
        payload["segmentation_trained"] = segmentation.trained
    if extra:
        payload["extra"] = extra
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_bundle(path) -> ModelBundle:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != "model" or payload.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(f"not a model checkpoint (or wrong version): {path}")
    config = ModelConfig.from_json(payload["config"])
    generator = Generator(config)
    generator.load_state_dict(payload["generator"])
    style_encoder = StyleEncoder(config)
    style_encoder.load_state_dict(payload["style_encoder"])
    segmentation = None
    if "segmentation" in payload:
        segmentation = SegmentationNet(config)
        segmentation.load_state_dict(payload["segmentation"])
        segmentation.trained = bool(payload.get("segmentation_trained", False))
    return ModelBundle(config=config, generator=generator,
                       style_encoder=style_encoder,
                       segmentation=segmentation).eval()


def load_discriminator(path, config: ModelConfig) -> MultiScaleDiscriminator:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if "discriminator" not in payload:
        raise ValidationError(f"checkpoint {path} carries no discriminator")
    disc = MultiScaleDiscriminator(config)
    disc.load_state_dict(payload["discriminator"])
    return disc
