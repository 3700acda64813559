"""Explorative face super-resolution with semantic regions and per-region
style codes: one low-resolution input, many controllable high-resolution
solutions."""

__version__ = "0.1.0"

from .config import ModelConfig
from .types import ImageTensor, SemanticMask, StyleMatrix, ValidationError

__all__ = [
    "ImageTensor",
    "SemanticMask",
    "StyleMatrix",
    "ModelConfig",
    "ValidationError",
    "__version__",
]
