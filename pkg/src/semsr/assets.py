"""External pretrained weight assets (VGG-19, Inception-v3, patch-similarity
linear weights). These are consumed, never trained; downloads are verified
against pinned checksum prefixes. The assets directory comes from
$SEMSR_ASSETS (default ~/.cache/semsr/assets).
"""
from __future__ import annotations

import hashlib
import os
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

ASSETS_ENV = "SEMSR_ASSETS"


class AssetMissingError(RuntimeError):
    """An external weight file is required but not present."""


@dataclass(frozen=True)
class AssetSpec:
    name: str
    filename: str
    url: str
    # torch-hub files embed the first 8 sha256 hex digits in the filename;
    # that prefix is what we can pin and verify.
    sha256_prefix: Optional[str]
    description: str


ASSETS = {
    "vgg19": AssetSpec(
        name="vgg19",
        filename="vgg19-dcbb9e9d.pth",
        url="https://download.pytorch.org/models/vgg19-dcbb9e9d.pth",
        sha256_prefix="dcbb9e9d",
        description="VGG-19 backbone for the perceptual loss",
    ),
    "inception": AssetSpec(
        name="inception",
        filename="inception_v3_google-0cc3c7bd.pth",
        url="https://download.pytorch.org/models/inception_v3_google-0cc3c7bd.pth",
        sha256_prefix="0cc3c7bd",
        description="Inception-v3 embedder for distribution-distance evaluation",
    ),
    "vgg16": AssetSpec(
        name="vgg16",
        filename="vgg16-397923af.pth",
        url="https://download.pytorch.org/models/vgg16-397923af.pth",
        sha256_prefix="397923af",
        description="VGG-16 backbone for learned patch similarity",
    ),
    "lpips_vgg": AssetSpec(
        name="lpips_vgg",
        filename="lpips_vgg.pth",
        url="https://github.com/richzhang/PerceptualSimilarity/raw/master/lpips/weights/v0.1/vgg.pth",
        sha256_prefix=None,
        description="Per-channel linear weights for learned patch similarity",
    ),
}


def assets_dir() -> Path:
    root = os.environ.get(ASSETS_ENV)
    if root:
        return Path(root)
    return Path.home() / ".cache" / "semsr" / "assets"


def asset_path(name: str) -> Path:
    if name not in ASSETS:
        raise KeyError(f"unknown asset {name!r}; known: {sorted(ASSETS)}")
    return assets_dir() / ASSETS[name].filename


def asset_available(name: str) -> bool:
    return asset_path(name).exists()


def require_asset(name: str) -> Path:
    path = asset_path(name)
    if not path.exists():
        spec = ASSETS[name]
        raise AssetMissingError(
            f"missing weight asset {name!r} ({spec.description}). "
            f"Run `semsr assets --download {name}` or place {spec.filename} "
            f"in {assets_dir()} (override with ${ASSETS_ENV})."
        )
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def download_asset(name: str, force: bool = False) -> Path:
    spec = ASSETS[name]
    dest = asset_path(name)
    if dest.exists() and not force:
        return dest
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = dest.with_suffix(".part")
    urllib.request.urlretrieve(spec.url, tmp)
    if spec.sha256_prefix is not None:
        got = _sha256(tmp)
        if not got.startswith(spec.sha256_prefix):
            tmp.unlink(missing_ok=True)
            raise RuntimeError(
                f"checksum mismatch for {name}: expected prefix "
                f"{spec.sha256_prefix}, got {got}"
            )
    tmp.replace(dest)
    return dest


def status() -> dict:
    return {name: asset_available(name) for name in ASSETS}
