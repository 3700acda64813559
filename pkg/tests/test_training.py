import json

import numpy as np
import pytest
import torch

from semsr.config import ModelConfig
from semsr.data import GuidePool, read_manifest
from semsr.losses import TinyFeatureExtractor
from semsr.synth import generate_corpus
from semsr.training import (
    ABLATION_PRESETS,
    TrainingDiverged,
    batches_from_records,
    build_batch,
    build_state,
    load_train_state,
    make_ablation_config,
    save_train_state,
    train,
    train_step,
)
from semsr.types import ValidationError


def tiny_config(**kw):
    base = dict(scale=4, n_regions=19, style_dim=8, base_channels=8,
                min_channels=8, enc_channels=(4, 6, 6), mod_hidden=8,
                n_extra_blocks=1, disc_channels=(8, 8, 8, 8),
                seg_channels=(8, 8, 8, 8), batch_size=2, seed=0)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("traincorpus")
    return generate_corpus(out, n=12, size=32, seed=11, identities=6)


@pytest.fixture(scope="module")
def extractor():
    return TinyFeatureExtractor(channels=8, seed=0)


def _weights_equal(a, b):
    sa, sb = a.state_dict(), b.state_dict()
    return all(torch.equal(sa[k], sb[k]) for k in sa)


def test_ablation_grid_matches_component_table():
    assert ABLATION_PRESETS == {
        "prior-only": (False, False, False),
        "lr-style-only": (False, True, False),
        "hr-style-only": (False, False, True),
        "semantics-only": (True, False, False),
        "independent": (True, True, False),
        "guided": (True, True, True),
    }
    cfg = make_ablation_config("semantics-only")
    assert (cfg.use_semantics, cfg.use_lr_style, cfg.use_hr_style) == (True, False, False)
    cfg = make_ablation_config("guided")
    assert (cfg.use_semantics, cfg.use_lr_style, cfg.use_hr_style) == (True, True, True)
    assert cfg.variant == "guided"
    cfg = make_ablation_config("independent")
    assert (cfg.use_semantics, cfg.use_lr_style, cfg.use_hr_style) == (True, True, False)
    assert cfg.variant == "independent"
    cfg = make_ablation_config("Prior_Only")  # case/separator-insensitive
    assert cfg.use_semantics is False


def test_ablation_unknown_name_lists_valid():
    with pytest.raises(ValidationError, match="guided"):
        make_ablation_config("mystery")


def test_train_step_deterministic(corpus, extractor):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config()

    def run():
        state = build_state(cfg)
        rng = np.random.default_rng(1)
        batch = build_batch(records[:2], cfg, rng)
        for _ in range(2):
            state, metrics = train_step(state, batch, cfg, extractor)
        return state, metrics

    state_a, metrics_a = run()
    state_b, metrics_b = run()
    assert metrics_a == metrics_b
    assert _weights_equal(state_a.generator, state_b.generator)
    assert _weights_equal(state_a.style_encoder, state_b.style_encoder)
    assert _weights_equal(state_a.discriminator, state_b.discriminator)


def test_train_step_metrics_logged(corpus, extractor):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config()
    state = build_state(cfg)
    batch = build_batch(records[:2], cfg, np.random.default_rng(2))
    state, metrics = train_step(state, batch, cfg, extractor)
    for key in ("loss_d", "loss_g", "loss_adv", "loss_feat", "loss_vgg", "patch_acc"):
        assert key in metrics and np.isfinite(metrics[key])
    assert state.step == 1


def test_train_step_nan_aborts_with_dump(corpus, extractor, tmp_path):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config()
    state = build_state(cfg)
    with torch.no_grad():
        for p in state.generator.parameters():
            p.fill_(float("nan"))
    batch = build_batch(records[:2], cfg, np.random.default_rng(3))
    with pytest.raises(TrainingDiverged):
        train_step(state, batch, cfg, extractor, dump_dir=tmp_path)
    dumps = list(tmp_path.glob("diverged_step*.json"))
    assert dumps
    payload = json.loads(dumps[0].read_text())
    assert "metrics" in payload and "weight_norms" in payload


def test_guided_batch_carries_guides(corpus):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config(variant="guided", use_hr_style=True)
    pool = GuidePool(records)
    batch = build_batch(records[:2], cfg, np.random.default_rng(4),
                        guide_pool=pool)
    assert batch["guide"] is not None
    assert batch["guide"].shape == batch["x_hr"].shape
    assert batch["guide_mask"] is not None
    with pytest.raises(ValidationError):
        build_batch(records[:2], cfg, np.random.default_rng(4))


def test_guided_train_step_runs(corpus, extractor):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config(variant="guided", use_hr_style=True)
    state = build_state(cfg)
    pool = GuidePool(records)
    batch = build_batch(records[:2], cfg, np.random.default_rng(5),
                        guide_pool=pool)
    state, metrics = train_step(state, batch, cfg, extractor)
    assert np.isfinite(metrics["loss_g"])


def test_prior_only_train_step_runs(corpus, extractor):
    records = read_manifest(corpus, split="train")
    cfg = make_ablation_config(
        "prior-only", scale=4, style_dim=8, base_channels=8, min_channels=8,
        enc_channels=(4, 6, 6), mod_hidden=8, n_extra_blocks=1,
        disc_channels=(8, 8, 8, 8), batch_size=2,
    )
    state = build_state(cfg)
    batch = build_batch(records[:2], cfg, np.random.default_rng(6))
    state, metrics = train_step(state, batch, cfg, extractor)
    assert np.isfinite(metrics["loss_g"])


def test_checkpoint_round_trip_bit_exact(corpus, extractor, tmp_path):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config(seed=9)

    def fresh_batches(rng):
        return build_batch(records[:2], cfg, rng)

    # Uninterrupted: three steps.
    torch.manual_seed(cfg.seed)
    state_a = build_state(cfg)
    rng_feed = np.random.default_rng(100)
    batches = [fresh_batches(rng_feed) for _ in range(3)]
    for b in batches[:2]:
        state_a, _ = train_step(state_a, b, cfg, extractor)
    save_train_state(state_a, tmp_path / "ckpt.pt")
    state_a, metrics_a = train_step(state_a, batches[2], cfg, extractor)

    # Interrupted: reload after two steps, then the same third batch.
    state_b = load_train_state(tmp_path / "ckpt.pt")
    state_b, metrics_b = train_step(state_b, batches[2], cfg, extractor)

    assert metrics_a == metrics_b
    assert _weights_equal(state_a.generator, state_b.generator)
    assert _weights_equal(state_a.style_encoder, state_b.style_encoder)
    assert _weights_equal(state_a.discriminator, state_b.discriminator)


def test_batches_deterministic_order(corpus):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config(batch_size=2)
    ids_a = [b["x_lr"].sum().item()
             for b in batches_from_records(records, cfg, np.random.default_rng(7))]
    ids_b = [b["x_lr"].sum().item()
             for b in batches_from_records(records, cfg, np.random.default_rng(7))]
    assert ids_a == ids_b


def test_train_driver_writes_artifacts(corpus, extractor, tmp_path):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config(batch_size=2, epochs=1)
    state = train(records, cfg, extractor, tmp_path, max_steps=3,
                  checkpoint_every=2, log_every=0, augment=False)
    assert state.step == 3
    assert (tmp_path / "metrics.ndjson").exists()
    assert (tmp_path / "train_state.pt").exists()
    assert (tmp_path / "model.pt").exists()
    lines = (tmp_path / "metrics.ndjson").read_text().strip().splitlines()
    assert len(lines) == 3
    # Bundle loads and renders.
    from semsr.checkpoint import load_bundle

    bundle = load_bundle(tmp_path / "model.pt")
    assert bundle.config == cfg


def test_train_resume_continues(corpus, extractor, tmp_path):
    records = read_manifest(corpus, split="train")
    cfg = tiny_config(batch_size=2, epochs=1, seed=13)
    train(records, cfg, extractor, tmp_path / "a", max_steps=2,
          checkpoint_every=1, log_every=0, augment=False)
    state = train(records, cfg, extractor, tmp_path / "b", max_steps=4,
                  resume=str(tmp_path / "a" / "train_state.pt"),
                  checkpoint_every=10, log_every=0, augment=False)
    assert state.step == 4
