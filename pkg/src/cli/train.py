"""
train: fit a ratio model on grouped samples and write its checkpoint.
"""

import argparse
from typing import Any, Dict

from loguru import logger

from src.cli.common import (
    add_data_flags,
    add_loss_flags,
    add_model_flags,
    add_optimizer_flags,
    build_loss,
    load_training_data,
    load_validation_data,
    output_dir,
)
from src.config import Settings
from src.models import init_model, save_checkpoint
from src.services.trainer import train
from src.utils.data_io import write_json


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("train", help="Fit a ratio model")
    add_data_flags(parser)
    add_loss_flags(parser)
    add_model_flags(parser)
    add_optimizer_flags(parser)
    parser.add_argument(
        "--log-every",
        dest="log_every",
        type=int,
        default=0,
        help="Print 'epoch,loss' CSV lines to stdout every N epochs",
    )
    parser.add_argument(
        "--validation",
        nargs="+",
        help="Held-out CSVs in the --data layout; the best epoch on them is kept",
    )
    parser.set_defaults(handler=run_train)
    return parser


def run_train(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    dataset = load_training_data(settings)
    loss_spec = build_loss(settings, dataset)
    model = init_model(settings.model_spec(dataset.dim, dataset.k), settings.seed, dataset)

    on_epoch = None
    if args.log_every and args.log_every > 0:
        print("epoch,loss", flush=True)

        def on_epoch(epoch: int, loss: float) -> None:
            if epoch % args.log_every == 0:
                print(f"{epoch},{loss!r}", flush=True)

    validation = load_validation_data(settings)
    model, report = train(
        loss_spec, model, dataset, settings.optimizer_config(), on_epoch, validation
    )

    out = output_dir(settings)
    checkpoint = save_checkpoint(model, out / "model.json")
    doc = report.model_dump(mode="json")
    write_json(out / "train_report.json", doc)
    logger.info(f"Checkpoint written to {checkpoint}")
    return doc
