"""
Run Configuration Schemas

Pydantic models describing what to build and how to optimise it: model
specification, optimiser configuration, Gaussian benchmark specification and
the resolved run configuration recorded in run.json.
"""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ModelKind(str, Enum):
    """Parametric ratio model families."""
    LOGLINEAR = "loglinear"
    MLP = "mlp"


class FeatureKind(str, Enum):
    """Feature maps for log-linear models."""
    IDENTITY = "identity"
    POLY = "poly"
    RBF = "rbf"


class OptimizerMethod(str, Enum):
    """First-order optimisers."""
    SGD = "sgd"
    ADAM = "adam"


class ModelSpec(BaseModel):
    """Specification from which init_model builds a RatioModel."""

    model_config = ConfigDict(frozen=True)

    kind: ModelKind = Field(default=ModelKind.LOGLINEAR, description="Model family")
    dim: int = Field(ge=1, description="Input dimension d")
    k: int = Field(ge=2, description="Number of distributions")
    features: FeatureKind = Field(default=FeatureKind.IDENTITY, description="Feature map (loglinear)")
    degree: int = Field(default=2, ge=1, description="Polynomial degree")
    n_centers: int = Field(default=100, ge=1, description="Maximum number of RBF centers")
    bandwidth: Optional[float] = Field(
        default=None, gt=0, description="RBF bandwidth; median heuristic when omitted"
    )
    hidden: List[int] = Field(default_factory=lambda: [32, 32], description="Mlp hidden widths")
    clamp: float = Field(default=30.0, gt=0, description="Log-ratio bound L")

    @field_validator("hidden")
    @classmethod
    def validate_hidden(cls, v: List[int]) -> List[int]:
        if any(width < 1 for width in v):
            raise ValueError("hidden widths must be positive")
        return v


class OptimizerConfig(BaseModel):
    """Optimiser and minibatch schedule."""

    model_config = ConfigDict(frozen=True)

    method: OptimizerMethod = Field(default=OptimizerMethod.ADAM, description="sgd or adam")
    step_size: float = Field(default=1e-3, gt=0, description="Learning rate")
    beta1: float = Field(default=0.9, gt=0, lt=1, description="Adam first-moment decay")
    beta2: float = Field(default=0.999, gt=0, lt=1, description="Adam second-moment decay")
    epsilon: float = Field(default=1e-8, gt=0, description="Adam denominator offset")
    minibatch_size: int = Field(default=128, ge=1, description="Samples per group per step")
    epochs: int = Field(default=200, ge=0, description="Passes over the largest group")
    seed: int = Field(default=0, ge=0, description="Seed for shuffling")
    full_batch: bool = Field(default=False, description="Use every sample at every step")
    divergence_limit: float = Field(default=1e8, gt=0, description="Abort when |loss| exceeds this")
    patience: Optional[int] = Field(
        default=None, ge=1, description="Stop after this many epochs without validation improvement"
    )


class GaussianSpec(BaseModel):
    """Unit-covariance Gaussian family for the synthetic benchmark."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1, description="Data dimension")
    means: List[List[float]] = Field(description="One mean vector per distribution")
    n_per_group: int = Field(default=2000, ge=1, description="Training samples per group")
    n_eval: int = Field(default=1000, ge=1, description="Held-out samples per group")
    seed: int = Field(default=0, ge=0, description="Sampling seed")

    @model_validator(mode="after")
    def validate_means(self) -> "GaussianSpec":
        if len(self.means) < 2:
            raise ValueError("need at least two means")
        if any(len(mu) != self.dim for mu in self.means):
            raise ValueError(f"every mean must have length dim={self.dim}")
        return self

    @property
    def k(self) -> int:
        return len(self.means)

