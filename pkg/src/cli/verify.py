"""
Verification commands: verify-theory and grad-check.
"""

import argparse
from typing import Any, Dict

from loguru import logger

from src.cli.common import output_dir
from src.config import Settings
from src.services.theory import run_theory_suite
from src.services.trainer import run_gradient_suite
from src.utils.data_io import write_json


def register(subparsers: argparse._SubParsersAction) -> None:
    theory = subparsers.add_parser("verify-theory", help="Randomised checks of the loss identities")
    theory.add_argument("--trials", type=int, help="Random trials per check")
    theory.set_defaults(handler=run_verify_theory)

    grad = subparsers.add_parser("grad-check", help="Analytic vs finite-difference gradients")
    grad.add_argument("--trials", type=int, help="Random configurations")
    grad.set_defaults(handler=run_grad_check, command_defaults={"trials": 100})


def run_verify_theory(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    report = run_theory_suite(trials=settings.trials, seed=settings.seed)
    for check in report.checks:
        if not check.passed:
            logger.warning(f"{check.name}: residual {check.max_residual:.3g} above {check.threshold:g}")
    doc = report.model_dump(mode="json")
    write_json(output_dir(settings) / "theory_report.json", doc)
    return doc


def run_grad_check(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    report = run_gradient_suite(trials=settings.trials, seed=settings.seed)
    for result in report.results:
        if not result.passed:
            logger.warning(f"{result.loss}/{result.model}: relative error {result.max_rel_error:.3g}")
    doc = report.model_dump(mode="json")
    write_json(output_dir(settings) / "gradcheck_report.json", doc)
    return doc
