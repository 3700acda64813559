import numpy as np
import pytest
import torch

from semsr.config import ModelConfig
from semsr.losses import (
    PERCEPTUAL_STAGE_WEIGHTS,
    TinyFeatureExtractor,
    adv_loss_d,
    adv_loss_g,
    build_perceptual_extractor,
    feat_match_loss,
    perceptual_loss,
    total_loss,
)
from semsr.types import ValidationError


def test_hinge_d_saturated():
    real = torch.full((1, 1, 3, 3), 10.0)
    fake = torch.full((1, 1, 3, 3), -10.0)
    assert adv_loss_d(real, fake).item() == 0.0


def test_hinge_d_zero_logits():
    real = torch.zeros(1, 1, 3, 3)
    fake = torch.zeros(1, 1, 3, 3)
    # max(0, 1-0) + max(0, 1+0) = 2
    assert adv_loss_d(real, fake).item() == pytest.approx(2.0)


def test_hinge_d_single_patch_closed_form():
    real = torch.tensor([[[[0.5]]]])
    fake = torch.tensor([[[[-0.25]]]])
    assert adv_loss_d(real, fake).item() == pytest.approx(0.5 + 0.75)


def test_hinge_d_scale_list_mismatch():
    with pytest.raises(ValidationError):
        adv_loss_d([torch.zeros(1, 1, 2, 2)], [torch.zeros(1, 1, 2, 2)] * 2)


def test_hinge_g_closed_forms():
    assert adv_loss_g(torch.zeros(1, 1, 2, 2)).item() == 0.0
    assert adv_loss_g(torch.full((1, 1, 2, 2), -2.0)).item() == pytest.approx(2.0)
    scales = [torch.zeros(1, 1, 2, 2), torch.full((1, 1, 2, 2), 2.0)]
    assert adv_loss_g(scales).item() == pytest.approx(-1.0)


def test_feat_match_identical_zero():
    feats = [torch.randn(1, 4, 6, 6), torch.randn(1, 8, 3, 3)]
    assert feat_match_loss(feats, [f.clone() for f in feats]).item() == 0.0


def test_feat_match_unit_offset():
    real = [torch.randn(1, 4, 6, 6), torch.randn(1, 8, 3, 3)]
    fake = [f + 1.0 for f in real]
    assert feat_match_loss(real, fake).item() == pytest.approx(1.0)


def test_feat_match_layer_mean():
    real = [torch.zeros(1, 2, 4, 4), torch.zeros(1, 2, 4, 4)]
    fake = [torch.full((1, 2, 4, 4), 2.0), torch.zeros(1, 2, 4, 4)]
    assert feat_match_loss(real, fake).item() == pytest.approx(1.0)


def test_feat_match_multiscale_and_mismatch():
    real = [[torch.zeros(1, 2, 4, 4)], [torch.zeros(1, 2, 2, 2)]]
    fake = [[torch.ones(1, 2, 4, 4)], [torch.ones(1, 2, 2, 2)]]
    assert feat_match_loss(real, fake).item() == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        feat_match_loss([real[0]], [fake[0] + [torch.zeros(1)]])


def test_perceptual_identical_zero():
    ext = TinyFeatureExtractor(seed=0)
    img = torch.rand(1, 3, 32, 32) * 2 - 1
    assert perceptual_loss(img, img.clone(), ext).item() == 0.0


def test_perceptual_monotone_in_offset():
    ext = TinyFeatureExtractor(seed=1)
    torch.manual_seed(0)
    img = torch.rand(1, 3, 32, 32) * 2 - 1
    eps = 0.02
    near = perceptual_loss(img, (img + eps).clamp(-1, 1), ext).item()
    far = perceptual_loss(img, (img + 2 * eps).clamp(-1, 1), ext).item()
    assert 0.0 < near < far


def test_perceptual_finite_random():
    ext = TinyFeatureExtractor(seed=2)
    a = torch.rand(2, 3, 16, 16) * 2 - 1
    b = torch.rand(2, 3, 16, 16) * 2 - 1
    val = perceptual_loss(a, b, ext).item()
    assert np.isfinite(val) and val >= 0


def test_perceptual_shape_checks():
    ext = TinyFeatureExtractor(seed=3)
    a = torch.rand(1, 3, 16, 16)
    with pytest.raises(ValidationError):
        perceptual_loss(a, torch.rand(1, 3, 8, 8), ext)
    assert len(PERCEPTUAL_STAGE_WEIGHTS) == 5


def test_vgg_asset_missing_is_instructive(tmp_path, monkeypatch):
    from semsr.assets import AssetMissingError

    monkeypatch.setenv("SEMSR_ASSETS", str(tmp_path))
    with pytest.raises(AssetMissingError, match="assets --download"):
        build_perceptual_extractor("vgg19")


def test_tiny_extractor_seed_determinism():
    a = TinyFeatureExtractor(seed=7)
    b = TinyFeatureExtractor(seed=7)
    img = torch.rand(1, 3, 16, 16)
    for fa, fb in zip(a(img), b(img)):
        assert torch.equal(fa, fb)
    assert build_perceptual_extractor("tiny:7") is not None


def test_total_loss_weighted_sum():
    cfg = ModelConfig(scale=4, n_regions=4, style_dim=8)
    parts = (torch.tensor(1.0), torch.tensor(0.2), torch.tensor(0.3))
    assert total_loss(*parts, cfg).item() == pytest.approx(6.0)
    assert cfg.lambda_feat == 10.0 and cfg.lambda_vgg == 10.0


def test_total_loss_pure_adversarial():
    cfg = ModelConfig(scale=4, n_regions=4, style_dim=8,
                      lambda_feat=0.0, lambda_vgg=0.0)
    out = total_loss(torch.tensor(1.5), torch.tensor(9.0), torch.tensor(9.0), cfg)
    assert out.item() == pytest.approx(1.5)


def test_total_loss_linear_in_parts():
    cfg = ModelConfig(scale=4, n_regions=4, style_dim=8)
    a = total_loss(torch.tensor(1.0), torch.tensor(2.0), torch.tensor(3.0), cfg)
    b = total_loss(torch.tensor(2.0), torch.tensor(4.0), torch.tensor(6.0), cfg)
    assert b.item() == pytest.approx(2 * a.item())
