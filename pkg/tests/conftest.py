"""
Pytest Configuration and Fixtures

Shared fixtures for all tests.
"""

import os
from pathlib import Path
from typing import Any, Callable, List, Tuple

import numpy as np
import orjson
import pytest
from loguru import logger

from src.main import parse_and_dispatch
from src.models import LogLinearModel, MlpModel
from src.schemas.core import GroupedDataset
from src.utils.data_io import write_group_files
from src.utils.numerics import guards


@pytest.fixture(autouse=True)
def reset_guards():
    """Each test starts with empty guard counters."""
    guards.reset()
    yield
    guards.reset()


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Keep MULTIDRE_ variables and a stray .env out of the tests."""
    for key in list(os.environ):
        if key.upper().startswith("MULTIDRE_"):
            monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)


# =============================================================================
# Data Fixtures
# =============================================================================

@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def three_gaussians(rng) -> GroupedDataset:
    """k=3 groups in d=2 with distinct means, 40 samples each."""
    means = [(1.0, 0.0), (-1.0, 0.5), (0.0, -0.5)]
    return GroupedDataset.from_arrays([np.asarray(mu) + rng.standard_normal((40, 2)) for mu in means])


@pytest.fixture
def two_gaussians(rng) -> GroupedDataset:
    """k=2 groups in d=1 at +-0.5."""
    return GroupedDataset.from_arrays([0.5 + rng.standard_normal((60, 1)), -0.5 + rng.standard_normal((60, 1))])


@pytest.fixture
def perturbed_loglinear(rng) -> Callable[[int, int], LogLinearModel]:
    """Factory of log-linear models with small random parameters."""

    def make(dim: int, k: int) -> LogLinearModel:
        model = LogLinearModel(dim, k)
        model.set_params(0.3 * rng.standard_normal(model.n_params))
        return model

    return make


@pytest.fixture
def perturbed_mlp(rng) -> Callable[[int, int], MlpModel]:
    """Factory of small MLPs with a nonzero output layer."""

    def make(dim: int, k: int) -> MlpModel:
        model = MlpModel(dim, k, hidden=(5,))
        model.initialize(rng)
        theta = model.get_params()
        model.set_params(theta + 0.3 * rng.standard_normal(theta.size))
        return model

    return make


@pytest.fixture
def group_files(tmp_path, three_gaussians) -> List[Path]:
    """three_gaussians written as one CSV per group."""
    return write_group_files(three_gaussians, tmp_path / "data")


# =============================================================================
# CLI Fixtures
# =============================================================================

@pytest.fixture
def run_cli(capsys) -> Callable[..., Tuple[int, Any]]:
    """Run one multidre command; returns the exit code and the stdout JSON."""
    def run(*argv: str) -> Tuple[int, Any]:
        code = parse_and_dispatch([str(a) for a in argv])
        out = capsys.readouterr().out
        return code, orjson.loads(out) if out.strip() else None

    yield run
    logger.remove()
