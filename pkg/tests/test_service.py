import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from semsr.service import create_app
from semsr.types import decode_image_png

from conftest import make_lr_png


@pytest.fixture()
def client(toy_checkpoint_dir):
    app = create_app(toy_checkpoint_dir)
    with TestClient(app) as c:
        yield c


def _create(client, **extra):
    payload = {"lr_png": base64.b64encode(make_lr_png(8, seed=1)).decode()}
    payload.update(extra)
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 201, resp.text
    return resp.json()


def test_checkpoints_listing(client):
    entries = client.get("/checkpoints").json()
    assert len(entries) == 1
    assert entries[0]["id"] == "toy"
    assert entries[0]["scale"] == 4
    assert entries[0]["has_segmentation"]


def test_create_session_predicts_mask(client):
    desc = _create(client)
    assert desc["lr_size"] == [8, 8]
    assert desc["hr_size"] == [32, 32]
    assert desc["variant"] == "independent"
    assert len(desc["style"]) == 19
    mask_png = base64.b64decode(desc["mask_png"])
    assert mask_png[:4] == b"\x89PNG"
    assert "default" in desc["snapshots"]


def test_create_session_with_guide(client):
    guide_png = base64.b64encode(make_lr_png(32, seed=2)).decode()
    desc = _create(client, guide_png=guide_png)
    assert desc["variant"] == "guided"
    assert desc["has_guide_style"]


def test_create_session_rejects_bad_uploads(client):
    resp = client.post("/sessions", json={"lr_png": "not base64!!"})
    assert resp.status_code == 400
    corrupt = base64.b64encode(b"valid base64, not a PNG").decode()
    resp = client.post("/sessions", json={"lr_png": corrupt})
    assert resp.status_code == 400
    assert "corrupt" in resp.json()["detail"]
    big = base64.b64encode(make_lr_png(300, seed=3)).decode()
    resp = client.post("/sessions", json={"lr_png": big})
    assert resp.status_code == 413
    resp = client.post("/sessions",
                       json={"lr_png": base64.b64encode(make_lr_png(8)).decode(),
                             "checkpoint": "ghost"})
    assert resp.status_code == 404


def test_render_and_fetch(client):
    desc = _create(client)
    sid = desc["session_id"]
    out = client.post(f"/sessions/{sid}/commands", json={"type": "render"}).json()
    assert out["render_index"] == 0
    png = client.get(f"/sessions/{sid}/renders/0")
    assert png.status_code == 200
    img = decode_image_png(png.content)
    assert (img.height, img.width) == (32, 32)
    missing = client.get(f"/sessions/{sid}/renders/5")
    assert missing.status_code == 404


def test_render_deterministic_bytes(client):
    desc = _create(client)
    sid = desc["session_id"]
    client.post(f"/sessions/{sid}/commands", json={"type": "render"})
    client.post(f"/sessions/{sid}/commands", json={"type": "render"})
    a = client.get(f"/sessions/{sid}/renders/0").content
    b = client.get(f"/sessions/{sid}/renders/1").content
    assert a == b


def test_interpolate_t0_render_matches_base(client):
    desc = _create(client)
    sid = desc["session_id"]
    r0 = client.post(f"/sessions/{sid}/commands", json={"type": "render"}).json()
    out = client.post(f"/sessions/{sid}/commands",
                      json={"type": "sample", "seed": 5}).json()
    client.post(f"/sessions/{sid}/commands",
                json={"type": "interpolate", "a": "default", "b": "current",
                      "t": 0.0})
    r1 = client.post(f"/sessions/{sid}/commands", json={"type": "render"}).json()
    a = client.get(f"/sessions/{sid}/renders/{r0['render_index']}").content
    b = client.get(f"/sessions/{sid}/renders/{r1['render_index']}").content
    assert a == b
    assert out["applied"] == "sample"


def test_interpolate_validation(client):
    sid = _create(client)["session_id"]
    resp = client.post(f"/sessions/{sid}/commands",
                       json={"type": "interpolate", "t": 1.5})
    assert resp.status_code == 400
    resp = client.post(f"/sessions/{sid}/commands",
                       json={"type": "interpolate", "a": "nope", "t": 0.5})
    assert resp.status_code == 400


def test_paint_undo_restores_mask(client):
    sid = _create(client)["session_id"]
    before = client.get(f"/sessions/{sid}").json()["mask_png"]
    out = client.post(f"/sessions/{sid}/commands", json={
        "type": "paint", "region": "hair",
        "stroke": [[2, 2], [2, 20]], "radius": 2.0,
    }).json()
    assert out["applied"] == "paint"
    painted = out["mask_png"]
    assert painted != before
    undone = client.post(f"/sessions/{sid}/commands",
                         json={"type": "undo_mask"}).json()["mask_png"]
    assert undone == before
    resp = client.post(f"/sessions/{sid}/commands", json={"type": "undo_mask"})
    assert resp.status_code == 400


def test_mask_edit_commands(client):
    sid = _create(client)["session_id"]
    for cmd in (
        {"type": "grow", "region": 1, "radius": 1},
        {"type": "shrink", "region": 1, "radius": 1},
        {"type": "transfer", "src": 1, "dst": 2},
    ):
        resp = client.post(f"/sessions/{sid}/commands", json=cmd)
        assert resp.status_code == 200, resp.text
    resp = client.post(f"/sessions/{sid}/commands",
                       json={"type": "grow", "region": 99, "radius": 1})
    assert resp.status_code == 400
    resp = client.post(f"/sessions/{sid}/commands", json={
        "type": "paint", "region": 1, "stroke": [[500, 500]], "radius": 1,
    })
    assert resp.status_code == 400


def test_style_commands(client):
    sid = _create(client)["session_id"]
    out = client.post(f"/sessions/{sid}/commands",
                      json={"type": "jitter", "delta": 0.1, "seed": 3}).json()
    assert out["applied"] == "jitter"
    style = np.asarray(out["style"], dtype=np.float32)
    assert np.abs(style).max() <= 1.0
    client.post(f"/sessions/{sid}/commands",
                json={"type": "snapshot", "name": "jittered"})
    desc = client.get(f"/sessions/{sid}").json()
    assert "jittered" in desc["snapshots"]
    out = client.post(f"/sessions/{sid}/commands",
                      json={"type": "set_style",
                            "data": np.zeros((19, 8)).tolist()}).json()
    assert np.allclose(np.asarray(out["style"]), 0.0)
    resp = client.post(f"/sessions/{sid}/commands",
                       json={"type": "set_style", "data": [[0.0]]})
    assert resp.status_code == 400
    resp = client.post(f"/sessions/{sid}/commands",
                       json={"type": "jitter", "delta": -1})
    assert resp.status_code == 400


def test_mix_from_guide_changes_render(client):
    guide_png = base64.b64encode(make_lr_png(32, seed=9)).decode()
    desc = _create(client, guide_png=guide_png)
    sid = desc["session_id"]
    base = client.post(f"/sessions/{sid}/commands", json={"type": "render"}).json()
    client.post(f"/sessions/{sid}/commands",
                json={"type": "sample", "seed": 77})
    out = client.post(f"/sessions/{sid}/commands",
                      json={"type": "mix", "regions": ["hair"],
                            "source": "guide"}).json()
    assert out["regions"] == [13]
    after = client.post(f"/sessions/{sid}/commands", json={"type": "render"}).json()
    a = client.get(f"/sessions/{sid}/renders/{base['render_index']}").content
    b = client.get(f"/sessions/{sid}/renders/{after['render_index']}").content
    assert a != b


def test_unknown_session_and_command(client):
    assert client.get("/sessions/ghost").status_code == 404
    sid = _create(client)["session_id"]
    resp = client.post(f"/sessions/{sid}/commands", json={"type": "explode"})
    assert resp.status_code == 400


def test_session_ttl_eviction(toy_checkpoint_dir):
    app = create_app(toy_checkpoint_dir, ttl_seconds=0.0)
    with TestClient(app) as client:
        sid = _create(client)["session_id"]
        assert client.get(f"/sessions/{sid}").status_code == 404


def test_render_history_hash_header(client):
    sid = _create(client)["session_id"]
    out = client.post(f"/sessions/{sid}/commands", json={"type": "render"}).json()
    resp = client.get(f"/sessions/{sid}/renders/{out['render_index']}")
    assert resp.headers["X-Inputs-Hash"] == out["inputs_hash"]
