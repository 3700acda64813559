"""Evaluation metrics and the corpus evaluation harness.

PSNR/SSIM run on [0, 1]-denormalized images (SSIM on Rec.601 luminance,
11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03). The learned patch
similarity and the distribution distance consume pluggable extractors /
embedders so desk-scale runs do not depend on external weight assets.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import torch

from . import assets
from .types import ImageTensor, ValidationError

PSNR_CAP_DB = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Rec.601 luminance weights.
_LUMA = np.array([0.299, 0.587, 0.114])

FID_EPS = 1e-6
FID_EIG_TOL = -1e-6

REPORT_VERSION = 1

# Published scores of the original full-scale training runs (multi-day,
# full face dataset). Desk-scale runs cannot reproduce these; reports carry
# them as the comparison anchor.
FULL_SCALE_REFERENCE = {
    ("independent", 128): {"ssim": 0.6631, "lpips": 0.1063, "fid": 13.84},
    ("guided", 128): {"ssim": 0.6628, "lpips": 0.1071, "fid": 11.25},
    ("independent", 256): {"ssim": 0.6770, "lpips": 0.1691, "fid": 22.97},
    ("guided", 256): {"ssim": 0.6887, "lpips": 0.1519, "fid": 22.02},
}


def _to_unit(img: ImageTensor) -> np.ndarray:
    """[-1, 1] -> [0, 1] float64 planes."""
    return (img.data.astype(np.float64) + 1.0) / 2.0


def psnr(a: ImageTensor, b: ImageTensor) -> float:
    """Peak signal-to-noise ratio in dB over [0, 1]; capped at 99 dB."""
    if a.data.shape != b.data.shape:
        raise ValidationError(
            f"image shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    mse = float(np.mean((_to_unit(a) - _to_unit(b)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def _luminance(img: ImageTensor) -> np.ndarray:
    unit = _to_unit(img)
    if unit.shape[0] == 1:
        return unit[0]
    if unit.shape[0] == 3:
        return np.einsum("c,chw->hw", _LUMA, unit)
    raise ValidationError(f"expected 1 or 3 channels, got {unit.shape[0]}")


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    xs = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(xs ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def _filter_valid(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation along both axes."""
    from numpy.lib.stride_tricks import sliding_window_view

    k = kernel.size
    rows = sliding_window_view(plane, k, axis=0)
    rows = np.tensordot(rows, kernel, axes=([2], [0]))
    cols = sliding_window_view(rows, k, axis=1)
    return np.tensordot(cols, kernel, axes=([2], [0]))


def ssim(a: ImageTensor, b: ImageTensor) -> float:
    """Mean windowed structural similarity on luminance."""
    if a.data.shape != b.data.shape:
        raise ValidationError(
            f"image shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise ValidationError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM"
        )
    x = _luminance(a)
    y = _luminance(b)
    kernel = _gaussian_window()
    mu_x = _filter_valid(x, kernel)
    mu_y = _filter_valid(y, kernel)
    xx = _filter_valid(x * x, kernel) - mu_x ** 2
    yy = _filter_valid(y * y, kernel) - mu_y ** 2
    xy = _filter_valid(x * y, kernel) - mu_x * mu_y
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


class Lpips:
    """Learned patch similarity: unit-normalized extractor activations,
    per-channel linear weights, spatial-mean squared differences summed
    over stages.

    `lin_weights` is one non-negative per-channel vector per stage; None
    falls back to uniform 1/C weights (used when the published linear-layer
    asset is unavailable).
    """

    def __init__(self, extractor, lin_weights=None):
        self.extractor = extractor
        self.lin_weights = lin_weights

    def __call__(self, a: ImageTensor, b: ImageTensor) -> float:
        if a.data.shape != b.data.shape:
            raise ValidationError(
                f"image shapes differ: {a.data.shape} vs {b.data.shape}"
            )
        ta = torch.from_numpy(a.data).unsqueeze(0)
        tb = torch.from_numpy(b.data).unsqueeze(0)
        return float(self.distance_t(ta, tb).item())

    def distance_t(self, ta: torch.Tensor, tb: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            feats_a = self.extractor(ta)
            feats_b = self.extractor(tb)
        total = torch.zeros(ta.shape[0])
        for i, (fa, fb) in enumerate(zip(feats_a, feats_b)):
            na = fa / torch.sqrt((fa ** 2).sum(dim=1, keepdim=True) + 1e-10)
            nb = fb / torch.sqrt((fb ** 2).sum(dim=1, keepdim=True) + 1e-10)
            diff = (na - nb) ** 2
            if self.lin_weights is not None:
                w = self.lin_weights[i].view(1, -1, 1, 1).to(diff.dtype)
                stage = (diff * w).sum(dim=1)
            else:
                stage = diff.mean(dim=1)
            total = total + stage.mean(dim=(1, 2))
        return total


def load_lpips_weights(path=None):
    """Per-stage linear weights from the published patch-similarity asset."""
    if path is None:
        path = assets.require_asset("lpips_vgg")
    state = torch.load(path, map_location="cpu", weights_only=True)
    weights = []
    for i in range(5):
        for key in (f"lin{i}.model.1.weight", f"lins.{i}.model.1.weight"):
            if key in state:
                weights.append(state[key].flatten().clamp(min=0.0))
                break
        else:
            raise ValidationError(f"stage {i} weights missing from {path}")
    return weights


def build_lpips(spec: str = "tiny:0") -> Lpips:
    """'vgg' (asset-backed backbone + published weights) or 'tiny[:seed]'."""
    from .losses import TinyFeatureExtractor

    if spec == "vgg":
        from torchvision.models import vgg16

        full = vgg16(weights=None)
        full.load_state_dict(torch.load(
            assets.require_asset("vgg16"), map_location="cpu", weights_only=True
        ))
        net = full.features
        slices = ((0, 4), (4, 9), (9, 16), (16, 23), (23, 30))

        class _Vgg16Stages(torch.nn.Module):
            # Published input normalization for [-1, 1] images.
            SHIFT = (-0.030, -0.088, -0.188)
            SCALE = (0.458, 0.448, 0.450)

            def __init__(self):
                super().__init__()
                self.stages = torch.nn.ModuleList(
                    torch.nn.Sequential(*[net[i] for i in range(s, e)])
                    for s, e in slices
                )
                for p in self.parameters():
                    p.requires_grad_(False)
                self.eval()

            def forward(self, img):
                shift = torch.tensor(self.SHIFT).view(1, 3, 1, 1).to(img.dtype)
                scale = torch.tensor(self.SCALE).view(1, 3, 1, 1).to(img.dtype)
                h = (img - shift) / scale
                outs = []
                for stage in self.stages:
                    h = stage(h)
                    outs.append(h)
                return outs

        return Lpips(_Vgg16Stages(), load_lpips_weights())
    if spec.startswith("tiny"):
        seed = int(spec.split(":", 1)[1]) if ":" in spec else 0
        return Lpips(TinyFeatureExtractor(seed=seed))
    raise ValidationError(f"unknown lpips spec {spec!r}")


def _sym_sqrt_eigvals(mat: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric PSD matrix, tiny negatives clipped."""
    sym = (mat + mat.T) / 2.0
    vals = np.linalg.eigvalsh(sym)
    if vals.min(initial=0.0) < FID_EIG_TOL:
        raise ValidationError(
            f"matrix has eigenvalue {vals.min():.3e} below tolerance {FID_EIG_TOL}"
        )
    return np.clip(vals, 0.0, None)


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    sym = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    if vals.min(initial=0.0) < FID_EIG_TOL:
        raise ValidationError(
            f"matrix has eigenvalue {vals.min():.3e} below tolerance {FID_EIG_TOL}"
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid_from_stats(mu_a, sigma_a, mu_b, sigma_b) -> float:
    """Frechet distance between two Gaussians.

    ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the cross
    square root computed via sqrt(S_a) S_b sqrt(S_a) (symmetric route).
    Near-singular covariances (min eigenvalue < eps) get eps*I added to both.
    """
    mu_a = np.asarray(mu_a, dtype=np.float64)
    mu_b = np.asarray(mu_b, dtype=np.float64)
    sigma_a = np.asarray(sigma_a, dtype=np.float64)
    sigma_b = np.asarray(sigma_b, dtype=np.float64)
    min_eig = min(
        np.linalg.eigvalsh((sigma_a + sigma_a.T) / 2.0).min(),
        np.linalg.eigvalsh((sigma_b + sigma_b.T) / 2.0).min(),
    )
    if min_eig < FID_EPS:
        reg = np.eye(sigma_a.shape[0]) * FID_EPS
        sigma_a = sigma_a + reg
        sigma_b = sigma_b + reg
    root_a = _sym_sqrt(sigma_a)
    inner = root_a @ sigma_b @ root_a
    trace_sqrt = float(np.sqrt(_sym_sqrt_eigvals(inner)).sum())
    diff = float(((mu_a - mu_b) ** 2).sum())
    value = diff + float(np.trace(sigma_a) + np.trace(sigma_b)) - 2.0 * trace_sqrt
    return max(value, 0.0)


def fid(emb_a: np.ndarray, emb_b: np.ndarray) -> float:
    """Frechet distance between two embedding sets (n >= 2 each)."""
    emb_a = np.asarray(emb_a, dtype=np.float64)
    emb_b = np.asarray(emb_b, dtype=np.float64)
    if emb_a.ndim != 2 or emb_b.ndim != 2:
        raise ValidationError("embeddings must be (n, d) arrays")
    if emb_a.shape[0] < 2 or emb_b.shape[0] < 2:
        raise ValidationError("need at least 2 samples per set")
    mu_a, mu_b = emb_a.mean(axis=0), emb_b.mean(axis=0)
    sigma_a = np.cov(emb_a, rowvar=False)
    sigma_b = np.cov(emb_b, rowvar=False)
    return fid_from_stats(mu_a, sigma_a, mu_b, sigma_b)


class TinyEmbedder:
    """Seeded random conv embedder standing in for the pretrained
    inception asset at desk scale."""

    def __init__(self, dim: int = 16, seed: int = 0):
        from .losses import TinyFeatureExtractor

        self.extractor = TinyFeatureExtractor(channels=dim, seed=seed)
        self.dim = dim

    def embed(self, images) -> np.ndarray:
        rows = []
        with torch.no_grad():
            for img in images:
                t = torch.from_numpy(img.data).unsqueeze(0)
                feats = self.extractor(t)
                rows.append(feats[-1].mean(dim=(2, 3))[0].numpy())
        return np.stack(rows)


class InceptionEmbedder:
    """Pool-layer embeddings from the pretrained inception asset."""

    def __init__(self):
        from torchvision.models import inception_v3

        path = assets.require_asset("inception")
        net = inception_v3(weights=None, transform_input=False, aux_logits=True)
        state = torch.load(path, map_location="cpu", weights_only=True)
        net.load_state_dict(state)
        net.fc = torch.nn.Identity()
        net.eval()
        self.net = net
        self.dim = 2048

    def embed(self, images) -> np.ndarray:
        import torch.nn.functional as F

        rows = []
        with torch.no_grad():
            for img in images:
                t = torch.from_numpy(img.data).unsqueeze(0)
                t = F.interpolate(t, size=(299, 299), mode="bilinear",
                                  align_corners=False)
                rows.append(self.net(t)[0].numpy())
        return np.stack(rows)


def diversity_score(renders, perceptual: Lpips) -> float:
    """Mean pairwise learned distance across style variants of one input.

    Not a quantity from the evaluation protocol we compare against; reports
    label it separately.
    """
    n = len(renders)
    if n < 2:
        return 0.0
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += perceptual(renders[i], renders[j])
            pairs += 1
    return total / pairs


def evaluate_run(bundle, records, *, perceptual: Lpips, embedder,
                 n_styles: int = 4, seed: int = 0, out_dir=None) -> dict:
    """Per-image PSNR/SSIM/perceptual distance, corpus distribution
    distance, bicubic baseline row, and the style-diversity score.

    The bundle's own layout source is used when a record has no label map
    (predicted masks); ground-truth maps are used when present.
    """
    from .data import make_pair
    from .generator import render
    from .masks import resize_mask_nearest
    from .segmentation import predict_mask
    from .style import sample_style
    from .training import bicubic_baseline, default_style_for

    cfg = bundle.config
    rng = np.random.default_rng(seed)
    rows = []
    model_images, bicubic_images, real_images = [], [], []
    diversity_vals = []
    for rec in records:
        x_lr, x_hr, mask = make_pair(rec, cfg.scale)
        if mask is None:
            if bundle.segmentation is None:
                raise ValidationError(
                    f"record {rec.id} has no label map and the checkpoint "
                    "carries no segmentation net"
                )
            mask = predict_mask(x_lr, bundle.segmentation, x_hr.height)
        elif (mask.height, mask.width) != (x_hr.height, x_hr.width):
            mask = resize_mask_nearest(mask, x_hr.height, x_hr.width)
        style = default_style_for(bundle, x_lr, mask,
                                  guide=x_hr if cfg.use_hr_style else None,
                                  guide_mask=mask if cfg.use_hr_style else None)
        out = render(bundle.generator, x_lr, mask, style)
        base = bicubic_baseline(x_hr, cfg.scale)
        rows.append({
            "id": rec.id,
            "psnr": psnr(out, x_hr),
            "ssim": ssim(out, x_hr),
            "lpips": perceptual(out, x_hr),
            "psnr_bicubic": psnr(base, x_hr),
            "ssim_bicubic": ssim(base, x_hr),
            "lpips_bicubic": perceptual(base, x_hr),
        })
        model_images.append(out)
        bicubic_images.append(base)
        real_images.append(x_hr)
        if cfg.use_style and n_styles >= 2:
            variants = [
                render(bundle.generator, x_lr, mask,
                       sample_style(rng, cfg.n_regions, cfg.style_dim))
                for _ in range(n_styles)
            ]
            diversity_vals.append(diversity_score(variants, perceptual))

    real_emb = embedder.embed(real_images)
    report = {
        "version": REPORT_VERSION,
        "n_images": len(records),
        "scale": cfg.scale,
        "variant": cfg.variant,
        "per_image": rows,
        "summary": {
            "psnr": float(np.mean([r["psnr"] for r in rows])),
            "ssim": float(np.mean([r["ssim"] for r in rows])),
            "lpips": float(np.mean([r["lpips"] for r in rows])),
            "fid": fid(real_emb, embedder.embed(model_images)),
        },
        "bicubic_baseline": {
            "psnr": float(np.mean([r["psnr_bicubic"] for r in rows])),
            "ssim": float(np.mean([r["ssim_bicubic"] for r in rows])),
            "lpips": float(np.mean([r["lpips_bicubic"] for r in rows])),
            "fid": fid(real_emb, embedder.embed(bicubic_images)),
        },
        # Mean pairwise perceptual distance across sampled styles; this is
        # our own one-to-many measurement, not part of the comparison
        # protocol above.
        "style_diversity": (float(np.mean(diversity_vals))
                            if diversity_vals else None),
        "full_scale_reference": {
            f"{variant}@{res}": scores
            for (variant, res), scores in FULL_SCALE_REFERENCE.items()
        },
    }
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    rows = report["per_image"]
    if rows:
        with open(out / "report.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
