"""HTTP exploration service.

Stateful upscaling sessions over a JSON API: images/masks travel as base64
PNG, styles as float32 row-major nested lists. Commands mirror the
interactive workflows (mask painting, style mixing/interpolation/sampling,
noise jitter, rendering); renders are addressable history entries.
"""
from __future__ import annotations

import base64
import hashlib
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, ConfigDict

from .checkpoint import ModelBundle, load_bundle
from .generator import render
from .masks import (
    Grow,
    Paint,
    Shrink,
    Transfer,
    brush_stencil,
    decode_mask_png,
    edit_mask,
    encode_mask_png,
)
from .resample import bicubic_resample
from .segmentation import predict_mask
from .style import encode, inject_noise, interpolate, mix, sample_style, trivial_mask
from .types import (
    ImageTensor,
    SemanticMask,
    StyleMatrix,
    ValidationError,
    decode_image_png,
    encode_image_png,
)

MAX_LR_SIDE = 256
DEFAULT_TTL_SECONDS = 1800


@dataclass
class ExploreSession:
    id: str
    checkpoint_id: str
    x_lr: ImageTensor
    mask: SemanticMask
    style: Optional[StyleMatrix]
    variant: str
    guide_style: Optional[StyleMatrix] = None
    mask_undo: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    renders: list = field(default_factory=list)  # (png bytes, inputs hash)
    created: float = field(default_factory=time.time)
    last_used: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def inputs_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.x_lr.data.tobytes())
        digest.update(self.mask.data.tobytes())
        if self.style is not None:
            digest.update(self.style.data.tobytes())
        return digest.hexdigest()[:16]


class CreateSessionRequest(BaseModel):
    lr_png: str
    guide_png: Optional[str] = None
    mask_png: Optional[str] = None
    checkpoint: Optional[str] = None


class CommandRequest(BaseModel):
    model_config = ConfigDict(extra="allow")
    type: str


def _b64decode(payload: str, what: str) -> bytes:
    try:
        return base64.b64decode(payload, validate=True)
    except Exception:
        raise HTTPException(status_code=400, detail=f"invalid base64 {what}")


def _decode_image(blob: bytes, what: str) -> ImageTensor:
    try:
        return decode_image_png(blob)
    except Exception:
        raise HTTPException(status_code=400, detail=f"corrupt {what} upload")


def _decode_mask(blob: bytes, n_regions: int):
    try:
        return decode_mask_png(blob, n_regions)
    except ValidationError:
        raise
    except Exception:
        raise HTTPException(status_code=400, detail="corrupt mask upload")


class ServiceState:
    def __init__(self, checkpoint_dir, ttl_seconds: float = DEFAULT_TTL_SECONDS):
        self.checkpoint_dir = Path(checkpoint_dir)
        self.ttl = ttl_seconds
        self.sessions: dict[str, ExploreSession] = {}
        self.bundles: dict[str, ModelBundle] = {}
        self.store_lock = threading.Lock()

    def list_checkpoints(self):
        entries = []
        for path in sorted(self.checkpoint_dir.glob("*.pt")):
            try:
                bundle = self.get_bundle(path.stem)
            except Exception:
                continue
            entries.append({
                "id": path.stem,
                "scale": bundle.config.scale,
                "variant": bundle.config.variant,
                "n_regions": bundle.config.n_regions,
                "style_dim": bundle.config.style_dim,
                "has_segmentation": bundle.segmentation is not None,
            })
        return entries

    def get_bundle(self, checkpoint_id: str) -> ModelBundle:
        with self.store_lock:
            if checkpoint_id in self.bundles:
                return self.bundles[checkpoint_id]
        path = self.checkpoint_dir / f"{checkpoint_id}.pt"
        if not path.exists():
            raise HTTPException(status_code=404,
                                detail=f"unknown checkpoint {checkpoint_id!r}")
        bundle = load_bundle(path)
        with self.store_lock:
            self.bundles[checkpoint_id] = bundle
        return bundle

    def evict_idle(self):
        now = time.time()
        with self.store_lock:
            dead = [sid for sid, s in self.sessions.items()
                    if now - s.last_used > self.ttl]
            for sid in dead:
                del self.sessions[sid]

    def get_session(self, session_id: str) -> ExploreSession:
        self.evict_idle()
        with self.store_lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {session_id!r}")
        session.last_used = time.time()
        return session


def _session_descriptor(session: ExploreSession, bundle: ModelBundle) -> dict:
    return {
        "session_id": session.id,
        "checkpoint": session.checkpoint_id,
        "variant": session.variant,
        "scale": bundle.config.scale,
        "lr_size": [session.x_lr.height, session.x_lr.width],
        "hr_size": [session.mask.height, session.mask.width],
        "region_names": list(session.mask.region_names),
        "mask_png": base64.b64encode(encode_mask_png(session.mask)).decode(),
        "style": (session.style.data.tolist()
                  if session.style is not None else None),
        "has_guide_style": session.guide_style is not None,
        "snapshots": sorted(session.snapshots),
        "n_renders": len(session.renders),
        "undo_depth": len(session.mask_undo),
    }


def create_app(checkpoint_dir, ttl_seconds: float = DEFAULT_TTL_SECONDS) -> FastAPI:
    app = FastAPI(title="semsr exploration service")
    state = ServiceState(checkpoint_dir, ttl_seconds)
    app.state.service = state

    @app.exception_handler(ValidationError)
    async def _validation_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/checkpoints")
    def checkpoints():
        return state.list_checkpoints()

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        entries = state.list_checkpoints()
        if req.checkpoint is None:
            if not entries:
                raise HTTPException(status_code=503, detail="no checkpoints available")
            checkpoint_id = entries[0]["id"]
        else:
            checkpoint_id = req.checkpoint
        bundle = state.get_bundle(checkpoint_id)
        cfg = bundle.config

        x_lr = _decode_image(_b64decode(req.lr_png, "lr image"), "lr image")
        if x_lr.height != x_lr.width:
            raise HTTPException(status_code=400,
                                detail=f"lr image must be square, got "
                                       f"{x_lr.height}x{x_lr.width}")
        if x_lr.height > MAX_LR_SIDE:
            raise HTTPException(status_code=413,
                                detail=f"lr image too large (max {MAX_LR_SIDE})")
        hr_res = x_lr.height * cfg.scale

        if req.mask_png is not None:
            mask = _decode_mask(_b64decode(req.mask_png, "mask"), cfg.n_regions)
            if (mask.height, mask.width) != (hr_res, hr_res):
                raise HTTPException(
                    status_code=400,
                    detail=f"mask must be {hr_res}x{hr_res} for this checkpoint",
                )
        elif bundle.segmentation is not None:
            mask = predict_mask(x_lr, bundle.segmentation, hr_res)
        else:
            mask = trivial_mask(hr_res, hr_res, cfg.n_regions)

        guide_style = None
        variant = "independent"
        if req.guide_png is not None:
            guide = _decode_image(_b64decode(req.guide_png, "guide image"), "guide image")
            if guide.height != guide.width:
                raise HTTPException(status_code=400, detail="guide must be square")
            side = (guide.height // 4) * 4
            if side < 4:
                raise HTTPException(status_code=400, detail="guide too small")
            if side != guide.height:
                guide = bicubic_resample(guide, side, side)
            if bundle.segmentation is not None and side % cfg.scale == 0:
                guide_mask = predict_mask(
                    bicubic_resample(guide, side // cfg.scale, side // cfg.scale),
                    bundle.segmentation, side,
                )
            else:
                guide_mask = trivial_mask(side, side, cfg.n_regions)
            guide_style = encode(guide, guide_mask, "hr", bundle.style_encoder)
            variant = "guided"

        if cfg.use_style:
            if variant == "guided" and cfg.use_hr_style:
                style = guide_style
            else:
                style = encode(x_lr, mask, "lr", bundle.style_encoder)
        else:
            style = None

        session = ExploreSession(
            id=uuid.uuid4().hex,
            checkpoint_id=checkpoint_id,
            x_lr=x_lr,
            mask=mask,
            style=style,
            variant=variant,
            guide_style=guide_style,
        )
        if style is not None:
            session.snapshots["default"] = style
        with state.store_lock:
            state.sessions[session.id] = session
        return _session_descriptor(session, bundle)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = state.get_session(session_id)
        bundle = state.get_bundle(session.checkpoint_id)
        return _session_descriptor(session, bundle)

    @app.post("/sessions/{session_id}/commands")
    def apply_command(session_id: str, req: CommandRequest):
        session = state.get_session(session_id)
        bundle = state.get_bundle(session.checkpoint_id)
        with session.lock:
            result = _apply(session, bundle, req)
        descriptor = _session_descriptor(session, bundle)
        descriptor.update(result)
        return descriptor

    @app.get("/sessions/{session_id}/renders/{index}")
    def get_render(session_id: str, index: int):
        session = state.get_session(session_id)
        if not 0 <= index < len(session.renders):
            raise HTTPException(status_code=404,
                                detail=f"render {index} does not exist")
        png, inputs_hash = session.renders[index]
        return Response(content=png, media_type="image/png",
                        headers={"X-Inputs-Hash": inputs_hash})

    return app


def _require_style(session: ExploreSession) -> StyleMatrix:
    if session.style is None:
        raise HTTPException(status_code=400,
                            detail="this checkpoint has no style path")
    return session.style


def _resolve_style_ref(session: ExploreSession, name: str) -> StyleMatrix:
    if name == "current":
        return _require_style(session)
    if name == "guide":
        if session.guide_style is None:
            raise HTTPException(status_code=400, detail="session has no guide style")
        return session.guide_style
    if name in session.snapshots:
        return session.snapshots[name]
    raise HTTPException(status_code=400, detail=f"unknown style reference {name!r}")


def _region_index(session: ExploreSession, region) -> int:
    if isinstance(region, str):
        try:
            return session.mask.region_index(region)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
    idx = int(region)
    if not 0 <= idx < session.mask.n_regions:
        raise HTTPException(status_code=400,
                            detail=f"region index {idx} outside "
                                   f"[0, {session.mask.n_regions})")
    return idx


def _apply(session: ExploreSession, bundle: ModelBundle,
           req: CommandRequest) -> dict:
    body = req.model_dump()
    kind = body["type"]

    def arg(name, default=None, required=False):
        if required and name not in body:
            raise HTTPException(status_code=400,
                                detail=f"command {kind!r} requires {name!r}")
        return body.get(name, default)

    if kind in ("paint", "grow", "shrink", "transfer"):
        if kind == "paint":
            region = _region_index(session, arg("region", required=True))
            stroke = arg("stroke", required=True)
            radius = float(arg("radius", 1.0))
            if radius <= 0:
                raise HTTPException(status_code=400, detail="radius must be > 0")
            points = [(float(p[0]), float(p[1])) for p in stroke]
            for y, x in points:
                if not (0 <= y < session.mask.height and 0 <= x < session.mask.width):
                    raise HTTPException(status_code=400,
                                        detail=f"stroke point ({y}, {x}) out of bounds")
            stencil = brush_stencil(session.mask.height, session.mask.width,
                                    points, radius)
            edit = Paint(region=region, stencil=stencil)
        elif kind == "transfer":
            edit = Transfer(src=_region_index(session, arg("src", required=True)),
                            dst=_region_index(session, arg("dst", required=True)))
        else:
            region = _region_index(session, arg("region", required=True))
            radius = int(arg("radius", 1))
            if radius < 0:
                raise HTTPException(status_code=400, detail="radius must be >= 0")
            edit = (Grow(region=region, radius=radius) if kind == "grow"
                    else Shrink(region=region, radius=radius))
        session.mask_undo.append(session.mask)
        session.mask = edit_mask(session.mask, edit)
        return {"applied": kind}

    if kind == "undo_mask":
        if not session.mask_undo:
            raise HTTPException(status_code=400, detail="nothing to undo")
        session.mask = session.mask_undo.pop()
        return {"applied": kind}

    if kind == "set_style":
        data = np.asarray(arg("data", required=True), dtype=np.float32)
        expected = (bundle.config.n_regions, bundle.config.style_dim)
        if data.shape != expected:
            raise HTTPException(status_code=400,
                                detail=f"style must have shape {expected}")
        session.style = StyleMatrix(data)
        return {"applied": kind}

    if kind == "snapshot":
        name = str(arg("name", required=True))
        if name in ("current", "guide"):
            raise HTTPException(status_code=400,
                                detail=f"{name!r} is a reserved style name")
        session.snapshots[name] = _require_style(session)
        return {"applied": kind, "snapshot": name}

    if kind == "interpolate":
        t = float(arg("t", required=True))
        if not 0.0 <= t <= 1.0:
            raise HTTPException(status_code=400, detail="t must lie in [0, 1]")
        a = _resolve_style_ref(session, str(arg("a", "current")))
        b = _resolve_style_ref(session, str(arg("b", "default")))
        session.style = interpolate(a, b, t)
        return {"applied": kind, "t": t}

    if kind == "mix":
        source = _resolve_style_ref(session, str(arg("source", "guide")))
        regions = [_region_index(session, r) for r in arg("regions", required=True)]
        session.style = mix(_require_style(session), source, regions)
        return {"applied": kind, "regions": regions}

    if kind == "jitter":
        delta = float(arg("delta", bundle.config.noise_delta))
        if delta < 0:
            raise HTTPException(status_code=400, detail="delta must be >= 0")
        seed = int(arg("seed", 0))
        session.style = inject_noise(_require_style(session), delta,
                                     np.random.default_rng(seed))
        return {"applied": kind, "delta": delta, "seed": seed}

    if kind == "sample":
        seed = int(arg("seed", 0))
        session.style = sample_style(np.random.default_rng(seed),
                                     bundle.config.n_regions,
                                     bundle.config.style_dim)
        return {"applied": kind, "seed": seed}

    if kind == "render":
        mask = session.mask if bundle.config.use_semantics else None
        style = session.style if bundle.config.use_style else None
        out = render(bundle.generator, session.x_lr, mask, style)
        png = encode_image_png(out)
        session.renders.append((png, session.inputs_hash()))
        return {"applied": kind, "render_index": len(session.renders) - 1,
                "inputs_hash": session.renders[-1][1]}

    raise HTTPException(status_code=400, detail=f"unknown command type {kind!r}")
