"""
Pydantic Schemas

Domain values (Prior, GroupedDataset), run configuration and reports.
"""

from src.schemas.core import GroupedDataset, Prior
from src.schemas.config import (
    FeatureKind,
    GaussianSpec,
    ModelKind,
    ModelSpec,
    OptimizerConfig,
    OptimizerMethod,
)

__all__ = [
    "GroupedDataset",
    "Prior",
    "FeatureKind",
    "GaussianSpec",
    "ModelKind",
    "ModelSpec",
    "OptimizerConfig",
    "OptimizerMethod",
]
