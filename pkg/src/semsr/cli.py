"""Command-line entry points.

Subcommands: prepare-data | train-seg | train | infer | evaluate | serve |
assets. Failures print a machine-readable JSON error line on stderr and
exit non-zero (exit 2 for missing/invalid required inputs).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import assets as assets_mod
from .config import ModelConfig, load_config
from .types import ValidationError


def _fail(message: str, code: int = 1) -> int:
    print(json.dumps({"error": message}), file=sys.stderr)
    return code


def _config_from_args(args) -> ModelConfig:
    from .training import make_ablation_config

    overrides = {}
    for name in ("scale", "style_dim", "base_channels", "min_channels",
                 "batch_size", "epochs", "seed", "n_extra_blocks"):
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        return cfg.with_overrides(**overrides) if overrides else cfg
    if getattr(args, "ablation", None):
        return make_ablation_config(args.ablation, **overrides)
    return ModelConfig(**overrides)


def cmd_prepare_data(args) -> int:
    if args.source == "synthetic":
        from .synth import generate_corpus

        manifest = generate_corpus(args.out, n=args.count, size=args.size,
                                   seed=args.seed or 0,
                                   identities=args.identities)
    elif args.source == "celeba":
        from .data import prepare_celeba

        if not args.src:
            return _fail("--src is required for celeba", 2)
        manifest = prepare_celeba(args.src, args.out, size=args.size,
                                  limit=args.limit)
    elif args.source == "celebamask-hq":
        from .data import prepare_celebamask_hq

        if not args.src:
            return _fail("--src is required for celebamask-hq", 2)
        manifest = prepare_celebamask_hq(args.src, args.out, size=args.size,
                                         limit=args.limit)
    else:
        return _fail(f"unknown source {args.source!r}", 2)
    print(str(manifest))
    return 0


def cmd_train_seg(args) -> int:
    from .data import read_manifest
    from .segmentation import train_seg

    records = read_manifest(args.manifest, split="train")
    val_records = read_manifest(args.manifest, split="val")
    config = _config_from_args(args)
    _, history = train_seg(records, config, steps=args.steps,
                           epochs=args.epochs or 1, out_dir=args.out,
                           val_records=val_records)
    print(json.dumps({"steps": len(history),
                      "final_loss": history[-1]["loss"] if history else None}))
    return 0


def cmd_train(args) -> int:
    from .data import read_manifest
    from .losses import build_perceptual_extractor
    from .training import train

    records = read_manifest(args.manifest, split="train")
    config = _config_from_args(args)
    extractor = build_perceptual_extractor(args.extractor)
    segmentation = None
    if args.seg_checkpoint:
        from .segmentation import load_seg

        segmentation, _ = load_seg(args.seg_checkpoint)
    state = train(records, config, extractor, args.out,
                  max_steps=args.max_steps, resume=args.resume,
                  checkpoint_every=args.checkpoint_every,
                  segmentation=segmentation)
    print(json.dumps({"steps": state.step, "epochs": state.epoch,
                      "out": str(Path(args.out) / "model.pt")}))
    return 0


def cmd_infer(args) -> int:
    from .checkpoint import load_bundle
    from .generator import render
    from .masks import load_mask_png, save_mask_png
    from .segmentation import predict_mask
    from .style import encode, sample_style
    from .training import default_style_for
    from .types import load_image, save_image

    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        return _fail(f"checkpoint not found: {ckpt}", 2)
    bundle = load_bundle(ckpt)
    cfg = bundle.config
    x_lr = load_image(args.input)
    hr_res = x_lr.height * cfg.scale

    if args.mask == "predict":
        if bundle.segmentation is None:
            return _fail("checkpoint has no segmentation net; pass --mask FILE", 2)
        mask = predict_mask(x_lr, bundle.segmentation, hr_res)
    else:
        mask = load_mask_png(args.mask, cfg.n_regions)
        if (mask.height, mask.width) != (hr_res, hr_res):
            return _fail(f"mask must be {hr_res}x{hr_res}", 2)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    styles = []
    if args.style == "default":
        styles = [default_style_for(bundle, x_lr, mask)]
    elif args.style.startswith("sample:"):
        k = int(args.style.split(":", 1)[1])
        styles = [sample_style(rng, cfg.n_regions, cfg.style_dim) for _ in range(k)]
    elif args.style.startswith("guide:"):
        guide = load_image(args.style.split(":", 1)[1])
        styles = [encode(guide, mask, "hr", bundle.style_encoder)]
    else:
        return _fail(f"unknown style spec {args.style!r}", 2)

    save_mask_png(mask, out_dir / "mask.png")
    written = []
    for i, style in enumerate(styles):
        out = render(bundle.generator,
                     x_lr,
                     mask if cfg.use_semantics else None,
                     style if cfg.use_style else None)
        path = out_dir / f"render_{i:02d}.png"
        save_image(out, path)
        written.append(str(path))
    print(json.dumps({"renders": written, "mask": str(out_dir / "mask.png")}))
    return 0


def cmd_evaluate(args) -> int:
    from .checkpoint import load_bundle
    from .data import read_manifest
    from .metrics import InceptionEmbedder, TinyEmbedder, build_lpips, evaluate_run

    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        return _fail(f"checkpoint not found: {ckpt}", 2)
    bundle = load_bundle(ckpt)
    records = read_manifest(args.manifest, split=args.split)
    if args.limit:
        records = records[:args.limit]
    if not records:
        return _fail(f"no records in split {args.split!r}", 2)
    perceptual = build_lpips(args.lpips)
    embedder = (InceptionEmbedder() if args.embedder == "inception"
                else TinyEmbedder(seed=0))
    report = evaluate_run(bundle, records, perceptual=perceptual,
                          embedder=embedder, n_styles=args.styles,
                          seed=args.seed or 0, out_dir=args.out)
    print(json.dumps(report["summary"]))
    return 0


def cmd_serve(args) -> int:
    import socket

    import uvicorn

    from .service import create_app

    if not args.checkpoint_dir:
        return _fail("no checkpoint directory (flag --checkpoint-dir or "
                     "$SEMSR_CHECKPOINTS)", 2)
    app = create_app(args.checkpoint_dir, ttl_seconds=args.ttl)
    port = args.port
    if port == 0:
        probe = socket.socket()
        probe.bind((args.host, 0))
        port = probe.getsockname()[1]
        probe.close()
    print(json.dumps({"host": args.host, "port": port}), flush=True)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def cmd_assets(args) -> int:
    if args.download:
        names = (sorted(assets_mod.ASSETS) if args.download == "all"
                 else [args.download])
        for name in names:
            if name not in assets_mod.ASSETS:
                return _fail(f"unknown asset {name!r}", 2)
            path = assets_mod.download_asset(name, force=args.force)
            print(json.dumps({"asset": name, "path": str(path)}))
        return 0
    print(json.dumps(assets_mod.status()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semsr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="build a dataset manifest")
    p.add_argument("--source", choices=["celeba", "celebamask-hq", "synthetic"],
                   required=True)
    p.add_argument("--src", help="raw dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--limit", type=int)
    p.add_argument("--count", type=int, default=200, help="synthetic corpus size")
    p.add_argument("--identities", type=int, help="synthetic identity groups")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train-seg", help="train the face parser")
    p.add_argument("--manifest", "--dataset", dest="manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--scale", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train_seg)

    p = sub.add_parser("train", help="adversarial training")
    p.add_argument("--manifest", "--dataset", dest="manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="config JSON file")
    p.add_argument("--ablation", help="preset name (e.g. independent, guided)")
    p.add_argument("--scale", type=int)
    p.add_argument("--style-dim", dest="style_dim", type=int)
    p.add_argument("--base-channels", dest="base_channels", type=int)
    p.add_argument("--min-channels", dest="min_channels", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--resume")
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int,
                   default=250)
    p.add_argument("--extractor", default="tiny:0",
                   help="perceptual extractor: vgg19 or tiny[:seed]")
    p.add_argument("--seg-checkpoint", dest="seg_checkpoint",
                   help="parser checkpoint to embed in the bundle")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="upscale one LR image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask", default="predict", help="'predict' or a mask PNG path")
    p.add_argument("--style", default="default",
                   help="default | sample:k | guide:path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="metrics over a manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", "--dataset", dest="manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--limit", type=int)
    p.add_argument("--styles", type=int, default=4)
    p.add_argument("--seed", type=int)
    p.add_argument("--lpips", default="tiny:0", help="tiny[:seed] or vgg")
    p.add_argument("--embedder", default="tiny", choices=["tiny", "inception"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the exploration service")
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir",
                   default=os.environ.get("SEMSR_CHECKPOINTS"),
                   help="defaults to $SEMSR_CHECKPOINTS")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000,
                   help="0 binds an ephemeral port and prints it")
    p.add_argument("--ttl", type=float, default=1800.0,
                   help="idle session expiry in seconds")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("assets", help="manage external weight assets")
    p.add_argument("--download", help="asset name or 'all'")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_assets)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        return _fail(str(exc), 2)
    except assets_mod.AssetMissingError as exc:
        return _fail(str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        return _fail(f"{type(exc).__name__}: {exc}", 1)


if __name__ == "__main__":
    sys.exit(main())
