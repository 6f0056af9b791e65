"""
Sampling commands: mis (multiple importance sampling) and sir
(sampling-importance-resampling) driven by a trained checkpoint.
"""

import argparse
from typing import Any, Dict

import numpy as np

from src.cli.common import add_checkpoint_flag, index_list, load_model, output_dir, require
from src.config import Settings
from src.exceptions import DimensionMismatchError, InvalidInputError
from src.services.applications import MisWeights, ResampleScheme, mis_from_model, mis_report, sir_report
from src.utils.data_io import read_csv_rows, write_csv_table, write_json


def register(subparsers: argparse._SubParsersAction) -> None:
    mis = subparsers.add_parser("mis", help="Estimate E_target[phi] from proposal samples")
    add_checkpoint_flag(mis)
    mis.add_argument("--data", nargs="+", help="One sample CSV per proposal")
    mis.add_argument("--target", type=int, required=True, help="1-based target distribution")
    mis.add_argument("--proposals", required=True, help="1-based proposal indices, e.g. 1,2")
    mis.add_argument("--omega", help="Mixture weights over proposals (uniform by default)")
    mis.add_argument("--phi-dim", dest="phi_dim", type=int, default=1, help="phi(x) = x[phi_dim]")
    mis.set_defaults(handler=run_mis)

    sir = subparsers.add_parser("sir", help="Resample proposal samples toward a target")
    add_checkpoint_flag(sir)
    sir.add_argument("--data", nargs="+", help="Sample CSV of the proposal")
    sir.add_argument("--target", type=int, required=True, help="1-based target distribution")
    sir.add_argument("--proposal", type=int, required=True, help="1-based proposal distribution")
    sir.add_argument("--m", type=int, default=1000, help="Number of draws")
    sir.add_argument("--scheme", choices=[s.value for s in ResampleScheme], default="multinomial")
    sir.set_defaults(handler=run_sir)


def _load_points(path: str, dim: int) -> np.ndarray:
    X = np.asarray(read_csv_rows(path), dtype=float)
    if X.shape[1] != dim:
        raise DimensionMismatchError(f"{path}: samples have d={X.shape[1]}, model d={dim}")
    return X


def run_mis(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    model = load_model(settings)
    paths = require(settings.data, "--data")
    proposals = index_list(args.proposals, "--proposals")
    if len(paths) != proposals.size:
        raise InvalidInputError(f"{proposals.size} proposals need {proposals.size} sample files, got {len(paths)}")
    if args.omega:
        omega = [float(v) for v in args.omega.split(",")]
    else:
        omega = [1.0 / proposals.size] * proposals.size
    if not 1 <= args.phi_dim <= model.dim:
        raise InvalidInputError(f"--phi-dim must be in 1..{model.dim}")

    column = args.phi_dim - 1
    report = mis_report(
        mis_from_model(model, args.target, proposals.tolist()),
        MisWeights(omega=omega),
        lambda X: X[:, column],
        [_load_points(path, model.dim) for path in paths],
    )
    doc = report.model_dump(mode="json")
    write_json(output_dir(settings) / "mis.json", doc)
    return doc


def run_sir(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    model = load_model(settings)
    path = require(settings.data, "--data")[0]
    X = _load_points(path, model.dim)
    (ratio_fn,) = mis_from_model(model, args.target, [args.proposal])

    report = sir_report(ratio_fn(X), args.m, settings.seed, args.scheme)
    out = output_dir(settings)
    write_csv_table(
        out / "resampled.csv",
        [f"x{j + 1}" for j in range(model.dim)],
        [[repr(float(v)) for v in X[i]] for i in report.indices],
    )
    doc = report.model_dump(mode="json")
    write_json(out / "sir.json", doc)
    return doc
