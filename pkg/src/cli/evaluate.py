"""
Evaluation commands: eval-mae, divergence and auroc.
"""

import argparse
from typing import Any, Dict

import numpy as np

from src.cli.common import (
    add_checkpoint_flag,
    add_data_flags,
    add_loss_flags,
    check_model_fits,
    load_model,
    load_training_data,
    output_dir,
    require,
)
from src.config import Settings
from src.exceptions import DataFileError, DimensionMismatchError, InvalidInputError
from src.schemas.reports import DivergenceReport
from src.services.applications import mae_report
from src.services.bench import GaussianRatioOracle, mean_auroc, sample_gaussian_groups
from src.services.objectives import ObjectiveKind, make_objective
from src.services.theory import fdiv_plugin_with_se, fdiv_variational, jensen_shannon_divergence
from src.utils.data_io import load_dataset, load_quadratic, read_csv_rows, write_json
from src.utils.rng import make_rng


def register(subparsers: argparse._SubParsersAction) -> None:
    mae = subparsers.add_parser("eval-mae", help="Pairwise MAE against unit-covariance Gaussian truth")
    add_checkpoint_flag(mae)
    add_data_flags(mae)
    mae.add_argument("--means", required=True, help="CSV with one Gaussian mean per row, pivot last")
    mae.add_argument("--n-eval", dest="n_eval", type=int, help="Samples per group when --data is omitted")
    mae.set_defaults(handler=run_eval_mae)

    div = subparsers.add_parser("divergence", help="Plug-in and variational f-divergence estimates")
    add_checkpoint_flag(div)
    add_data_flags(div)
    add_loss_flags(div)
    div.set_defaults(handler=run_divergence)

    roc = subparsers.add_parser("auroc", help="Per-component AUROC of ratio scores")
    add_checkpoint_flag(roc)
    add_data_flags(roc)
    roc.add_argument("--scores", help="CSV of (score, 0/1 label) rows instead of a checkpoint")
    roc.set_defaults(handler=run_auroc)


def run_eval_mae(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    model = load_model(settings)
    means = np.asarray(read_csv_rows(args.means), dtype=float)
    if means.shape != (model.k, model.dim):
        raise DataFileError(
            args.means, f"expected {model.k} means of length {model.dim}, got shape {means.shape}"
        )
    oracle = GaussianRatioOracle(means)
    if settings.data:
        eval_points = load_dataset(settings.data).pooled()
    else:
        eval_points = sample_gaussian_groups(means, settings.n_eval, make_rng(settings.seed, "eval")).pooled()
    if eval_points.shape[1] != model.dim:
        raise DimensionMismatchError(f"evaluation points have d={eval_points.shape[1]}, model d={model.dim}")

    doc = mae_report(model, oracle.truth, eval_points).model_dump(mode="json")
    write_json(output_dir(settings) / "mae.json", doc)
    return doc


def run_divergence(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    if settings.rule:
        raise InvalidInputError("divergence takes --objective, not --rule")
    model = load_model(settings)
    dataset = load_training_data(settings)
    check_model_fits(model, dataset)

    name = settings.objective or ObjectiveKind.KLIEP.value
    H, q = load_quadratic(settings.quadratic_h, settings.quadratic_q)
    obj = make_objective(name, dataset.k, alpha=settings.alpha, H=H, q=q)
    plugin, se = fdiv_plugin_with_se(obj, model.evaluate, dataset.pivot)

    report = DivergenceReport(
        objective=obj.params(),
        plugin=plugin,
        plugin_se=se,
        variational=fdiv_variational(obj, model, dataset),
        js_divergence=(
            jensen_shannon_divergence(model.evaluate(dataset.pivot))
            if name == ObjectiveKind.MULTILR.value
            else None
        ),
        n_pivot=int(dataset.pivot.shape[0]),
    )
    doc = report.model_dump(mode="json")
    write_json(output_dir(settings) / "divergence.json", doc)
    return doc


def run_auroc(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    if args.scores:
        rows = np.asarray(read_csv_rows(args.scores), dtype=float)
        if rows.shape[1] != 2:
            raise DataFileError(args.scores, "expected (score, label) rows")
        scores, labels = rows[:, :1], np.where(rows[:, 1] == 1, 1, 0)
        if not np.all(np.isin(rows[:, 1], (0, 1))):
            raise DataFileError(args.scores, "labels must be 0 or 1")
        report = mean_auroc(scores, labels)
    else:
        model = load_model(settings)
        path = require(settings.data, "--data or --scores")[0]
        rows = np.asarray(read_csv_rows(path), dtype=float)
        if rows.shape[1] != model.dim + 1:
            raise DataFileError(path, f"expected a label column and {model.dim} coordinates")
        labels = rows[:, 0].astype(int)
        if np.any(labels < 1) or np.any(labels > model.k - 1):
            raise DataFileError(path, f"component labels must be in 1..{model.k - 1}")
        report = mean_auroc(model.evaluate(rows[:, 1:]), labels)

    doc = report.model_dump(mode="json")
    write_json(output_dir(settings) / "auroc.json", doc)
    return doc
