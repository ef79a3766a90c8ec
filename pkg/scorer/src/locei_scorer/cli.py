"""locei-scorer command line: train a checkpoint from ndjson example files,
or serve one over the linkforge-scorer/1 stdio protocol."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:
    import tomli as tomllib

from .data import read_examples
from .model import ModelConfig
from .training import TrainingConfig, load_checkpoint, save_checkpoint, train


def _build_parser():
    parser = argparse.ArgumentParser(prog="locei-scorer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the two-stage training pipeline")
    p.add_argument("--config", required=True, help="TOML training config")

    p = sub.add_parser("serve", help="serve a checkpoint over stdio")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--name", default=None, help="scorer name announced in the handshake")
    return parser


def _load_config(path):
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    model = ModelConfig(**raw.get("model", {}))
    training_raw = dict(raw.get("training", {}))
    for key in ("removal_weights", "languages", "stages"):
        if key in training_raw:
            training_raw[key] = tuple(training_raw[key])
    training = TrainingConfig(**training_raw)
    data = raw.get("data", {})
    output = raw.get("output", {})
    base = Path(path).parent
    stage1 = base / data["stage1"] if "stage1" in data else None
    stage2 = base / data["stage2"] if "stage2" in data else None
    checkpoint = base / output.get("checkpoint", "locei.ckpt")
    return model, training, stage1, stage2, checkpoint


def _file_hash(path) -> str:
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _cmd_train(args) -> int:
    model_config, training_config, stage1_path, stage2_path, checkpoint = _load_config(args.config)
    stage1 = read_examples(stage1_path) if stage1_path else []
    stage2 = read_examples(stage2_path) if stage2_path else []
    langs = set(training_config.languages)
    if langs:
        stage1 = [e for e in stage1 if e.lang in langs]
        stage2 = [e for e in stage2 if e.lang in langs]
    result = train(training_config, stage1, stage2, model_config=model_config)
    data_hashes = {
        name: _file_hash(p)
        for name, p in (("stage1", stage1_path), ("stage2", stage2_path))
        if p is not None
    }
    save_checkpoint(checkpoint, result, training_config, data_hashes)
    for stage, losses in result.stage_losses.items():
        rendered = ", ".join(f"{l:.4f}" for l in losses)
        print(f"{stage}: epochs={len(losses)} losses=[{rendered}]", file=sys.stderr)
    print(f"checkpoint written to {checkpoint}", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    from .serve import serve

    model = load_checkpoint(args.checkpoint)
    serve(model, name=args.name or f"locei:{Path(args.checkpoint).name}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "train":
        return _cmd_train(args)
    if args.command == "serve":
        return _cmd_serve(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
