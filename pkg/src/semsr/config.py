"""Model and training hyperparameters, with versioned JSON round-tripping."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

from .masks import N_REGIONS
from .types import ValidationError

CONFIG_VERSION = 1

VARIANTS = ("independent", "guided")

# Empirical noise amplitudes per variant (training-time style jitter).
DEFAULT_DELTA = {"independent": 0.2, "guided": 0.05}


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to rebuild the networks and the training run."""

    scale: int = 8
    n_regions: int = N_REGIONS
    style_dim: int = 512
    base_channels: int = 512
    min_channels: int = 64
    n_extra_blocks: int = 2
    mod_hidden: int = 128
    mod_kernel: int = 3
    enc_channels: tuple = (64, 128, 128)
    disc_channels: tuple = (64, 128, 256, 512)
    seg_channels: tuple = (32, 64, 64, 64)
    noise_delta: float | None = None
    lambda_feat: float = 10.0
    lambda_vgg: float = 10.0
    variant: str = "independent"
    use_semantics: bool = True
    use_lr_style: bool = True
    use_hr_style: bool = False
    g_lr: float = 1e-4
    d_lr: float = 4e-4
    adam_betas: tuple = (0.0, 0.9)
    batch_size: int = 4
    epochs: int = 7
    seed: int = 0

    def __post_init__(self):
        if self.scale not in (4, 8, 16, 32):
            raise ValidationError(f"scale must be one of 4, 8, 16, 32, got {self.scale}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.use_hr_style != (self.variant == "guided"):
            raise ValidationError(
                "use_hr_style is exactly the guided variant's style source; "
                f"got use_hr_style={self.use_hr_style} with variant={self.variant!r}"
            )
        if self.noise_delta is None:
            object.__setattr__(self, "noise_delta", DEFAULT_DELTA[self.variant])
        if self.noise_delta < 0:
            raise ValidationError("noise_delta must be >= 0")
        if self.lambda_feat < 0 or self.lambda_vgg < 0:
            raise ValidationError("loss weights must be >= 0")
        if self.n_regions < 1 or self.style_dim < 1:
            raise ValidationError("n_regions and style_dim must be >= 1")
        object.__setattr__(self, "enc_channels", tuple(self.enc_channels))
        object.__setattr__(self, "disc_channels", tuple(self.disc_channels))
        object.__setattr__(self, "seg_channels", tuple(self.seg_channels))
        object.__setattr__(self, "adam_betas", tuple(self.adam_betas))

    @property
    def n_up_blocks(self) -> int:
        """Upsampling blocks plus the fixed extra same-resolution blocks."""
        return int(math.log2(self.scale)) + self.n_extra_blocks

    @property
    def use_style(self) -> bool:
        return self.use_lr_style or self.use_hr_style

    def with_overrides(self, **kwargs) -> "ModelConfig":
        return replace(self, **kwargs)

    def to_json(self) -> str:
        payload = {"version": CONFIG_VERSION, "config": asdict(self)}
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        payload = json.loads(text)
        if payload.get("version") != CONFIG_VERSION:
            raise ValidationError(
                f"unsupported config version {payload.get('version')!r}, "
                f"expected {CONFIG_VERSION}"
            )
        return cls(**payload["config"])


def save_config(config: ModelConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(config.to_json() + "\n")


def load_config(path) -> ModelConfig:
    with open(path) as fh:
        return ModelConfig.from_json(fh.read())
