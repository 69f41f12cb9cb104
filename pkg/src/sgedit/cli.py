"""Command line entry points: dataset export, training, evaluation,
one-shot editing and the HTTP service."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adversarial import LossWeights
from .model import ManipulationModel, preset_config


def _add_make_dataset(sub):
    p = sub.add_parser("make-dataset", help="export a paired synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--res", type=int, default=64, choices=(16, 32, 64, 128))
    p.set_defaults(func=cmd_make_dataset)


def cmd_make_dataset(args):
    from .clevr import export_dataset

    manifest = export_dataset(args.count, args.out, seed=args.seed, res=args.res)
    print(f"wrote {manifest['count']} samples to {args.out} "
          f"(train/val/test = {'/'.join(str(len(manifest['splits'][s])) for s in ('train', 'val', 'test'))})")


def _add_train(sub):
    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--res", type=int, default=64, choices=(16, 32, 64, 128))
    p.add_argument("--preset", default="desk", choices=("paper", "desk"))
    p.add_argument("--mode", default="self", choices=("self", "supervised"))
    p.add_argument("--p-phi", type=float, default=0.25)
    p.add_argument("--p-x", type=float, default=0.35)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--val-interval", type=int, default=500)
    p.add_argument("--no-phi", action="store_true",
                   help="ablation: never condition on visual features")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)


def cmd_train(args):
    import torch

    from . import checkpoint as ckpt_io
    from .data import DatasetIndex
    from .trainer import MaskingConfig, TrainConfig, Trainer, build_model

    dataset = DatasetIndex(args.data)
    torch.manual_seed(args.seed)
    if args.resume:
        ckpt = ckpt_io.load(args.resume)
        model = build_model(ckpt.meta)
        train_cfg = TrainConfig(**{**ckpt.meta["train_config"], "steps": args.steps})
        train_cfg.betas = tuple(train_cfg.betas)
        mask_cfg = MaskingConfig(**ckpt.meta["mask_config"])
        weights = LossWeights(**ckpt.meta["loss_weights"])
        trainer = Trainer(model, train_cfg, mask_cfg, weights, vocab=ckpt.meta["vocab"])
        trainer.load_checkpoint_state(ckpt)
        print(f"resumed from {args.resume} at step {trainer.step_count}")
    else:
        config = preset_config(args.preset, len(dataset.objects), len(dataset.predicates),
                               image_size=args.res, use_visual_features=not args.no_phi)
        model = ManipulationModel(config)
        train_cfg = TrainConfig(steps=args.steps, batch_size=args.batch, seed=args.seed,
                                mode=args.mode, val_interval=args.val_interval)
        mask_cfg = MaskingConfig(p_phi=args.p_phi, p_x=args.p_x)
        trainer = Trainer(model, train_cfg, mask_cfg, LossWeights(),
                          vocab={"objects": dataset.objects,
                                 "predicates": dataset.predicates})
    report = trainer.fit(dataset, args.out)
    print(json.dumps(report, indent=2))


def _add_eval(sub):
    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--modes", default="auto,remove,replace,relationship,add")
    p.add_argument("--out", default=None, help="report JSON path")
    p.add_argument("--split", default="test")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heatmaps", default=None, help="directory for predicate heatmap PNGs")
    p.set_defaults(func=cmd_eval)


def cmd_eval(args):
    from .data import DatasetIndex
    from .metrics import evaluate, predicate_heatmaps
    from .trainer import load_model

    dataset = DatasetIndex(args.data)
    model, _ = load_model(args.ckpt)
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    report = evaluate(model, dataset, modes=modes, split=args.split,
                      seed=args.seed, limit=args.limit)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    if args.heatmaps:
        predicate_heatmaps(model, dataset, out_dir=args.heatmaps,
                           split=args.split, limit=args.limit)
        print(f"heatmaps written to {args.heatmaps}")


def _add_edit(sub):
    p = sub.add_parser("edit", help="apply graph edits to one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--ops", required=True, help="JSON list of edit ops")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_edit)


def cmd_edit(args):
    from .graph import edit_from_dict, graph_from_dict
    from .image_io import load_png, png_bytes
    from .service import run_edit_pipeline
    from .trainer import load_model

    model, _ = load_model(args.ckpt)
    image = load_png(args.image)
    graph = graph_from_dict(json.loads(Path(args.graph).read_text()))
    ops = [edit_from_dict(d) for d in json.loads(Path(args.ops).read_text())]
    state, final_graph, mask = run_edit_pipeline(model, image, graph, ops, seed=args.seed)
    Path(args.out).write_bytes(png_bytes(state.generated))
    print(f"wrote {args.out} ({len(ops)} edits, {len(mask.occlude_regions)} occluded regions)")


def _add_serve(sub):
    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frontend", default=None, help="static UI bundle directory")
    p.set_defaults(func=cmd_serve)


def cmd_serve(args):
    import uvicorn

    from .data import DatasetIndex
    from .service import create_app
    from .trainer import load_model

    model = None
    if args.ckpt:
        model, _ = load_model(args.ckpt)
    dataset = DatasetIndex(args.data) if args.data else None
    frontend = args.frontend
    if frontend is None:
        default = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend = default if default.is_dir() else None
    app = create_app(model, dataset, frontend_dir=frontend, base_seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sgedit",
                                     description="semantic image manipulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_make_dataset, _add_train, _add_eval, _add_edit, _add_serve):
        add(sub)
    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
