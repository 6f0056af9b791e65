"""
Benchmark commands: bench-gaussian and bench-ood.
"""

import argparse
from typing import Any, Dict

from src.cli.common import add_model_flags, add_optimizer_flags, csv_list, output_dir
from src.config import Settings
from src.schemas.config import FeatureKind
from src.services.bench import GAUSSIAN_METHODS, RANDOM_INIT, gaussian_table, run_gaussian_benchmark, run_ood_benchmark
from src.utils.data_io import write_csv_table, write_json


def _add_bench_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("benchmark")
    group.add_argument("--methods", type=csv_list, help="Comma-separated method names")
    group.add_argument("--seeds", type=int, help="Number of seeds, starting at --seed")
    group.add_argument("--jobs", type=int, help="Parallel worker processes")
    group.add_argument("--n-train", dest="n_train", type=int, help="Training samples per group")
    group.add_argument("--n-eval", dest="n_eval", type=int, help="Held-out samples per group")
    group.add_argument("--alpha", type=float, help="Parameter for power, logsumexp or pseudospherical")


def register(subparsers: argparse._SubParsersAction) -> None:
    gauss = subparsers.add_parser("bench-gaussian", help="Log-scale MAE benchmark on five unit Gaussians")
    _add_bench_flags(gauss)
    add_model_flags(gauss)
    add_optimizer_flags(gauss)
    gauss.add_argument("--dims", type=csv_list, help="Comma-separated dimensions, e.g. 2,5,10")
    gauss.add_argument("--fix-mean5", dest="fix_mean5", action="store_true", default=None)
    gauss.set_defaults(
        handler=run_bench_gaussian,
        command_defaults={"lr": 1e-2, "epochs": 1000, "full_batch": True, "patience": 50},
    )

    ood = subparsers.add_parser("bench-ood", help="AUROC benchmark on a 1-D Gaussian mixture")
    _add_bench_flags(ood)
    add_model_flags(ood)
    add_optimizer_flags(ood)
    ood.add_argument("--ood-means", dest="ood_means", type=csv_list, help="Component means")
    ood.add_argument("--ood-weights", dest="ood_weights", type=csv_list, help="Mixture weights")
    ood.set_defaults(
        handler=run_bench_ood,
        command_defaults={"features": FeatureKind.RBF, "lr": 1e-2, "epochs": 100},
    )


def run_bench_gaussian(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    report = run_gaussian_benchmark(
        dims=settings.dims,
        methods=settings.methods or GAUSSIAN_METHODS,
        seeds=settings.seed_list,
        n_per_group=settings.n_train,
        n_eval=settings.n_eval,
        model=settings.model_fields_for_bench(),
        optimizer=settings.optimizer_config(),
        fix_mean5=settings.fix_mean5,
        alpha=settings.alpha,
        n_jobs=settings.jobs,
    )
    out = output_dir(settings)
    header, rows = gaussian_table(report)
    write_csv_table(out / "gaussian_table.csv", header, rows)
    doc = report.model_dump(mode="json")
    write_json(out / "gaussian_report.json", doc)
    return doc


def run_bench_ood(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    report = run_ood_benchmark(
        component_means=settings.ood_means,
        weights=settings.ood_weights,
        n=settings.n_train,
        seed=settings.seed,
        methods=settings.methods or (RANDOM_INIT, "multilr"),
        n_eval=settings.n_eval,
        model=settings.model_fields_for_bench(),
        optimizer=settings.optimizer_config(),
        alpha=settings.alpha,
        n_jobs=settings.jobs,
    )
    out = output_dir(settings)
    write_csv_table(
        out / "ood_table.csv",
        ["method", "mean_auroc"],
        [[name, f"{result.mean_auroc:.4f}"] for name, result in report.methods.items()]
        + [["oracle", f"{report.oracle_auroc.mean_auroc:.4f}"]],
    )
    doc = report.model_dump(mode="json")
    write_json(out / "ood_report.json", doc)
    return doc
