"""
Ratio Models

Parametric density-ratio models, their construction from a ModelSpec and
JSON checkpoints.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from loguru import logger

from src.exceptions import DataFileError, InvalidInputError
from src.models.base import RatioModel
from src.models.features import (
    FeatureMap,
    IdentityFeatures,
    PolynomialFeatures,
    RBFFeatures,
    build_rbf_features,
    feature_map_from_dict,
)
from src.models.loglinear import LogLinearModel
from src.models.mlp import MlpModel
from src.schemas.config import FeatureKind, ModelKind, ModelSpec
from src.schemas.core import GroupedDataset
from src.utils.data_io import read_json, write_json
from src.utils.rng import make_rng


def init_model(
    spec: ModelSpec,
    seed: int = 0,
    dataset: Optional[GroupedDataset] = None,
) -> RatioModel:
    """
    Build a freshly initialised model.

    LogLinear starts at zero parameters and Mlp at fan-in scaled uniform
    hidden weights with a zero output layer; both output r = 1 everywhere.

    Args:
        spec: Model specification
        seed: Run seed (uses the "init" stream; RBF centers use "centers")
        dataset: Training data, required for RBF features

    Returns:
        RatioModel
    """
    if spec.kind == ModelKind.MLP:
        model: RatioModel = MlpModel(spec.dim, spec.k, spec.hidden, spec.clamp)
        model.initialize(make_rng(seed, "init"))
    else:
        if spec.features == FeatureKind.POLY:
            features: FeatureMap = PolynomialFeatures(spec.dim, spec.degree)
        elif spec.features == FeatureKind.RBF:
            if dataset is None:
                raise InvalidInputError("RBF features need a dataset to choose centers from")
            features = build_rbf_features(dataset, spec.n_centers, spec.bandwidth, seed)
        else:
            features = IdentityFeatures(spec.dim)
        model = LogLinearModel(spec.dim, spec.k, features, spec.clamp)

    logger.info(f"Model initialized: {model!r}")
    return model


def model_from_dict(doc: Dict[str, Any]) -> RatioModel:
    """Rebuild a model from its checkpoint document."""
    try:
        kind = doc["kind"]
        dim, k, clamp = int(doc["dim"]), int(doc["k"]), float(doc["clamp"])
        params = np.asarray(doc["params"], dtype=float)
        if kind == LogLinearModel.kind:
            model: RatioModel = LogLinearModel(
                dim, k, feature_map_from_dict(doc["feature_map"]), clamp
            )
        elif kind == MlpModel.kind:
            model = MlpModel(dim, k, doc["hidden"], clamp)
        else:
            raise InvalidInputError(f"unknown model kind '{kind}'")
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"invalid model checkpoint: {e}")
    model.set_params(params)
    return model


def save_checkpoint(model: RatioModel, path: Union[str, Path]) -> Path:
    """Write the model checkpoint as JSON."""
    return write_json(path, model.to_dict())


def load_checkpoint(path: Union[str, Path]) -> RatioModel:
    """Read a model checkpoint written by save_checkpoint."""
    doc = read_json(path)
    try:
        return model_from_dict(doc)
    except InvalidInputError as e:
        raise DataFileError(path, str(e))


__all__ = [
    "RatioModel",
    "LogLinearModel",
    "MlpModel",
    "FeatureMap",
    "IdentityFeatures",
    "PolynomialFeatures",
    "RBFFeatures",
    "init_model",
    "model_from_dict",
    "save_checkpoint",
    "load_checkpoint",
]
