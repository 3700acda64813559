import numpy as np
import pytest
import torch

from semsr.checkpoint import save_bundle
from semsr.config import ModelConfig
from semsr.data import read_manifest
from semsr.generator import Generator
from semsr.segmentation import SegmentationNet
from semsr.style import StyleEncoder
from semsr.synth import generate_corpus


TOY_CONFIG = ModelConfig(scale=4, n_regions=19, style_dim=8, base_channels=16,
                         min_channels=8, enc_channels=(4, 8, 8), mod_hidden=8,
                         n_extra_blocks=1, disc_channels=(8, 8, 8, 8),
                         seg_channels=(8, 8, 8, 8), batch_size=2, seed=0)


@pytest.fixture(scope="session")
def toy_checkpoint_dir(tmp_path_factory):
    """A checkpoint directory holding one untrained (but loadable and
    renderable) scale-4 bundle with a parser attached."""
    out = tmp_path_factory.mktemp("checkpoints")
    torch.manual_seed(0)
    gen = Generator(TOY_CONFIG)
    enc = StyleEncoder(TOY_CONFIG)
    seg = SegmentationNet(TOY_CONFIG)
    seg.trained = True  # toy weights; declared usable for plumbing tests
    save_bundle(out / "toy.pt", TOY_CONFIG, gen, enc, segmentation=seg)
    return out


@pytest.fixture(scope="session")
def session_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("sessioncorpus")
    manifest = generate_corpus(out, n=10, size=32, seed=21, identities=5)
    return manifest


@pytest.fixture(scope="session")
def session_records(session_corpus):
    return read_manifest(session_corpus)


def make_lr_png(size=8, seed=0):
    from semsr.types import ImageTensor, encode_image_png

    rng = np.random.default_rng(seed)
    img = ImageTensor(rng.uniform(-1, 1, size=(3, size, size)).astype(np.float32))
    return encode_image_png(img)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            name = getattr(report, "nodeid", "")
            if "test_criterion_" not in name or getattr(report, "when", "call") != "call":
                continue
            criterion = name.split("test_criterion_", 1)[1]
            status = "PASS" if outcome == "passed" else "FAIL"
            lines.append((criterion, status))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status in sorted(lines):
        terminalreporter.write_line(f"{status}  {criterion}")
