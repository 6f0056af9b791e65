"""
Shared CLI plumbing: flag groups, settings overrides and output paths.
"""

import argparse
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from src.config import Settings
from src.exceptions import InvalidInputError
from src.models import RatioModel, load_checkpoint
from src.schemas.config import FeatureKind, ModelKind, OptimizerMethod
from src.schemas.core import GroupedDataset
from src.services.link import estimate_prior
from src.services.objectives import ObjectiveKind
from src.services.trainer import LossSpec, make_loss
from src.utils.data_io import load_dataset, load_quadratic


def csv_list(value: str) -> str:
    """Comma-separated flag value; split by the settings validators."""
    if not value.strip():
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return value


def add_loss_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("loss")
    group.add_argument("--objective", help="Convex objective: multilr, lsif, kliep, power, quadratic, logsumexp")
    group.add_argument("--rule", help="Scoring rule: log, brier, pseudospherical")
    group.add_argument("--alpha", type=float, help="Objective or rule parameter")
    group.add_argument("--quadratic-h", dest="quadratic_h", help="CSV file with the Quadratic H matrix")
    group.add_argument("--quadratic-q", dest="quadratic_q", help="CSV file with the Quadratic q vector")


def add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--model", choices=[kind.value for kind in ModelKind])
    group.add_argument("--features", choices=[kind.value for kind in FeatureKind])
    group.add_argument("--hidden", type=csv_list, help="Mlp hidden widths, e.g. 32,32")
    group.add_argument("--degree", type=int, help="Polynomial degree")
    group.add_argument("--n-centers", dest="n_centers", type=int, help="RBF centers")


def add_optimizer_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("optimizer")
    group.add_argument("--optimizer", choices=[method.value for method in OptimizerMethod])
    group.add_argument("--epochs", type=int)
    group.add_argument("--lr", type=float, help="Step size")
    group.add_argument("--batch", type=int, help="Minibatch size per group")
    group.add_argument("--full-batch", dest="full_batch", action="store_true", default=None)
    group.add_argument("--patience", type=int, help="Early-stopping patience (needs a validation sample)")


def add_data_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("data")
    group.add_argument("--data", nargs="+", help="One CSV per group (pivot last) or one labelled CSV")
    group.add_argument("--pivot", type=int, help="1-based group to use as pivot")


def add_checkpoint_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", help="Model checkpoint JSON written by train")


def add_run_flags(parser: argparse.ArgumentParser) -> None:
    """Flags every subcommand takes."""
    group = parser.add_argument_group("run")
    group.add_argument("--config", help="TOML config file or a previous run.json")
    group.add_argument("--seed", type=int)
    group.add_argument("--out", dest="out_dir", help="Output directory")
    group.add_argument("--log-level", dest="log_level")


def settings_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values that name Settings fields; unset flags are dropped."""
    fields = Settings.model_fields
    return {key: val for key, val in vars(args).items() if key in fields and val is not None}


def apply_command_defaults(settings: Settings, defaults: Optional[Dict[str, Any]]) -> Settings:
    """Command-specific defaults for fields no source has set."""
    if not defaults:
        return settings
    update = {key: val for key, val in defaults.items() if key not in settings.model_fields_set}
    return settings.model_copy(update=update) if update else settings


def output_dir(settings: Settings) -> Path:
    path = Path(settings.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def require(value: Optional[Any], flag: str) -> Any:
    if value is None or value == []:
        raise InvalidInputError(f"{flag} is required")
    return value


def load_training_data(settings: Settings) -> GroupedDataset:
    return load_dataset(require(settings.data, "--data"), settings.pivot)


def load_validation_data(settings: Settings) -> Optional[GroupedDataset]:
    if not settings.validation:
        return None
    return load_dataset(settings.validation, settings.pivot)


def load_model(settings: Settings) -> RatioModel:
    return load_checkpoint(require(settings.checkpoint, "--checkpoint"))


def build_loss(settings: Settings, dataset: GroupedDataset) -> LossSpec:
    """The configured loss; Multi-LR uses the dataset's group-size prior."""
    name = settings.loss_name
    prior = estimate_prior(dataset) if name == ObjectiveKind.MULTILR.value else None
    H, q = load_quadratic(settings.quadratic_h, settings.quadratic_q)
    return make_loss(
        name,
        dataset.k,
        alpha=settings.loss_alpha,
        prior=prior,
        H=H,
        q=q,
        cap=settings.log_cap,
    )


def check_model_fits(model: RatioModel, dataset: GroupedDataset) -> None:
    if model.k != dataset.k or model.dim != dataset.dim:
        raise InvalidInputError(
            f"checkpoint (dim={model.dim}, k={model.k}) does not fit the data "
            f"(dim={dataset.dim}, k={dataset.k})"
        )


def index_list(values: Any, name: str) -> np.ndarray:
    """Parse a comma-separated list of 1-based indices."""
    try:
        return np.asarray([int(v) for v in str(values).split(",") if v.strip()], dtype=int)
    except ValueError:
        raise InvalidInputError(f"{name} must be comma-separated integers, got '{values}'")
