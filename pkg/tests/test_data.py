import numpy as np
import pytest

from semsr.data import (
    DatasetRecord,
    GuidePool,
    augment_pair,
    make_pair,
    read_manifest,
    sample_guide,
    write_manifest,
)
from semsr.synth import generate_corpus, synth_face
from semsr.types import ValidationError


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    manifest = generate_corpus(out, n=12, size=64, seed=1, identities=6)
    return manifest


def test_manifest_round_trip(corpus, tmp_path):
    records = read_manifest(corpus)
    assert len(records) == 12
    copy = tmp_path / "copy.jsonl"
    write_manifest(records, copy)
    assert read_manifest(copy) == records
    assert len(read_manifest(corpus, split="train")) == 10


def test_make_pair_shapes(corpus):
    rec = read_manifest(corpus)[0]
    x_lr, x_hr, mask = make_pair(rec, 8)
    assert (x_hr.height, x_hr.width) == (64, 64)
    assert (x_lr.height, x_lr.width) == (8, 8)
    assert mask is not None and mask.data.shape == (19, 64, 64)


def test_make_pair_scale_one_identity(corpus):
    rec = read_manifest(corpus)[0]
    x_lr, x_hr, _ = make_pair(rec, 1)
    assert np.array_equal(x_lr.data, x_hr.data)


def test_make_pair_deterministic(corpus):
    rec = read_manifest(corpus)[3]
    a = make_pair(rec, 4)
    b = make_pair(rec, 4)
    assert np.array_equal(a[0].data, b[0].data)
    assert np.array_equal(a[1].data, b[1].data)
    assert np.array_equal(a[2].data, b[2].data)


def test_make_pair_requires_mask(tmp_path, corpus):
    rec = read_manifest(corpus)[0]
    bare = DatasetRecord(id="x", hr_image=rec.hr_image, label_map=None)
    x_lr, x_hr, mask = make_pair(bare, 8)
    assert mask is None
    with pytest.raises(ValidationError, match="label map"):
        make_pair(bare, 8, require_mask=True)


def test_make_pair_rejects_bad_scale(corpus):
    rec = read_manifest(corpus)[0]
    with pytest.raises(ValidationError):
        make_pair(rec, 7)


def test_guide_prefers_other_image(corpus):
    records = read_manifest(corpus)
    pool = GuidePool(records)
    rec = records[0]
    # identities=6 over 12 records -> two images per identity
    guide = sample_guide(rec, pool)
    assert not guide.self_guide
    assert guide.record.identity == rec.identity
    assert guide.record.id != rec.id


def test_guide_self_fallback(corpus):
    records = read_manifest(corpus)
    lone = DatasetRecord(id="solo", hr_image=records[0].hr_image,
                         identity="unique-solo")
    pool = GuidePool(records + [lone])
    guide = pool.sample_guide(lone)
    assert guide.self_guide
    assert guide.record.id == "solo"


def test_guide_errors(corpus):
    records = read_manifest(corpus)
    with pytest.raises(ValidationError, match="empty"):
        GuidePool([]).sample_guide(records[0])
    pool = GuidePool(records)
    stranger = DatasetRecord(id="s", hr_image=records[0].hr_image, identity="nobody")
    with pytest.raises(ValidationError, match="identity"):
        pool.sample_guide(stranger)


def test_augment_flip_consistency(corpus):
    rec = read_manifest(corpus)[0]
    x_lr, x_hr, mask = make_pair(rec, 8)
    f_lr, f_hr, f_mask = augment_pair(x_lr, x_hr, mask, flip=True)
    assert np.array_equal(f_hr.data, x_hr.data[:, :, ::-1])
    assert np.array_equal(f_lr.data, x_lr.data[:, :, ::-1])
    assert (f_mask.data.sum(axis=0) == 1).all()
    same_lr, same_hr, same_mask = augment_pair(x_lr, x_hr, mask, flip=False)
    assert same_lr is x_lr and same_hr is x_hr and same_mask is mask


def test_synth_identity_shares_geometry():
    img_a, lab_a = synth_face(123, 48, variation=0)
    img_b, lab_b = synth_face(123, 48, variation=1)
    img_c, lab_c = synth_face(124, 48, variation=0)
    assert np.array_equal(lab_a, lab_b)          # same person, same layout
    assert not np.array_equal(img_a.data, img_b.data)  # background moved
    assert not np.array_equal(lab_a, lab_c)      # different person
