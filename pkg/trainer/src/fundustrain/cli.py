"""Command-line front for the harness.

    fundustrain train --task age --tensors out/tensors \
        --manifest data/manifest.csv --split out/split.csv --out ckpt/age
    fundustrain predict --checkpoint ckpt/age --tensors out/tensors \
        --manifest data/manifest.csv --split out/split.csv \
        --subset test --out predictions.csv
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import IMBALANCE_MODES, LOSSES, REGIMES, TrainConfig
from .exceptions import TrainerError
from .files import TASKS
from .models import BACKBONES
from .predict import predict_from_files
from .train import train_from_files

log = logging.getLogger("fundustrain")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fundustrain")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one task model")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--tensors", required=True, help="directory of FPT1 files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True, help="participant_id,subset file")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--quality-labels", help="gate labels file (quality task)")
    p.add_argument("--backbone", default="tiny-test", choices=BACKBONES)
    p.add_argument("--regime", default="full_finetune", choices=REGIMES)
    p.add_argument("--loss", default="auto", choices=LOSSES + ("auto",))
    p.add_argument("--imbalance", default="none", choices=IMBALANCE_MODES)
    p.add_argument("--undersample-n", type=int)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--pretrained-weights", help="local backbone weights file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-id")

    p = sub.add_parser("predict", help="score a subset with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tensors", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--subset", default="test")
    p.add_argument("--out", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            cfg = TrainConfig(
                task=args.task, backbone=args.backbone, regime=args.regime,
                lr=args.lr, batch_size=args.batch_size, patience=args.patience,
                max_epochs=args.max_epochs, loss=args.loss,
                imbalance=args.imbalance, undersample_n=args.undersample_n,
                augment=not args.no_augment,
                pretrained_weights=args.pretrained_weights,
                seed=args.seed, model_id=args.model_id,
            )
            meta, history = train_from_files(
                cfg, args.tensors, args.manifest, args.split, args.out,
                quality_labels_path=args.quality_labels,
            )
            log.info("trained %s: best val loss %.6f at epoch %d (%d epochs run)",
                     meta.model_id, meta.best_val_loss, meta.epoch, len(history))
            return 0
        if args.command == "predict":
            rows = predict_from_files(args.checkpoint, args.tensors, args.manifest,
                                      args.split, args.subset, args.out)
            log.info("wrote %d prediction(s) to %s", len(rows), args.out)
            return 0
        raise TrainerError(f"unknown command {args.command!r}")
    except TrainerError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
