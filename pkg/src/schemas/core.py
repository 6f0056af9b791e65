"""
Core Domain Schemas

Prior (a point in the k-simplex) and GroupedDataset (k sample groups over a
common d-dimensional domain). Group k is the pivot: the common denominator of
every canonical density ratio.
"""

from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.exceptions import InvalidDatasetError, InvalidInputError

PRIOR_ATOL = 1e-12


class Prior(BaseModel):
    """Class priors π_i = P(Y = i)."""

    model_config = ConfigDict(frozen=True)

    weights: List[float] = Field(description="Class prior probabilities, one per distribution")

    @field_validator("weights")
    @classmethod
    def validate_weights(cls, v: List[float]) -> List[float]:
        """Strictly positive weights summing to one."""
        arr = np.asarray(v, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidInputError("a prior needs at least two weights")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise InvalidInputError("prior weights must be strictly positive")
        if abs(float(arr.sum()) - 1.0) > PRIOR_ATOL:
            raise InvalidInputError(f"prior weights must sum to 1, got {arr.sum()!r}")
        return [float(w) for w in arr]

    @classmethod
    def uniform(cls, k: int) -> "Prior":
        """Uniform prior over k classes."""
        if k < 2:
            raise InvalidInputError("k must be at least 2")
        return cls(weights=[1.0 / k] * k)

    @classmethod
    def from_counts(cls, counts: Sequence[float]) -> "Prior":
        """Normalize nonnegative counts into a prior."""
        arr = np.asarray(counts, dtype=float)
        total = arr.sum()
        if total <= 0:
            raise InvalidInputError("counts must have a positive total")
        return cls(weights=list(arr / total))

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def array(self) -> np.ndarray:
        """Weights as a float array of shape (k,)."""
        return np.asarray(self.weights, dtype=float)

    def is_uniform(self) -> bool:
        return bool(np.allclose(self.array, 1.0 / self.k, rtol=0.0, atol=PRIOR_ATOL))


class GroupedDataset(BaseModel):
    """
    k groups of i.i.d. samples, one group per distribution P_i.

    Attributes:
        groups: List of (n_i, d) arrays
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    groups: List[np.ndarray] = Field(description="One (n_i, d) sample array per distribution")

    @model_validator(mode="after")
    def validate_groups(self) -> "GroupedDataset":
        """Nonempty, finite, equal-dimension groups; k >= 2."""
        if len(self.groups) < 2:
            raise InvalidDatasetError(f"need at least 2 groups, got {len(self.groups)}")
        dim = None
        for i, g in enumerate(self.groups):
            if not isinstance(g, np.ndarray) or g.ndim != 2:
                raise InvalidDatasetError(f"group {i + 1} must be a 2-D array")
            if g.shape[0] == 0:
                raise InvalidDatasetError(f"group {i + 1} is empty")
            if g.shape[1] == 0:
                raise InvalidDatasetError(f"group {i + 1} has zero dimension")
            if dim is None:
                dim = g.shape[1]
            elif g.shape[1] != dim:
                raise InvalidDatasetError(
                    f"group {i + 1} has dimension {g.shape[1]}, expected {dim}"
                )
            if not np.all(np.isfinite(g)):
                raise InvalidDatasetError(f"group {i + 1} contains non-finite values")
            g.setflags(write=False)
        return self

    @classmethod
    def from_arrays(cls, groups: Sequence[np.ndarray]) -> "GroupedDataset":
        """Build from array-likes, copying each group as float."""
        arrays = []
        for g in groups:
            arr = np.array(g, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            arrays.append(arr)
        return cls(groups=arrays)

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def dim(self) -> int:
        return int(self.groups[0].shape[1])

    @property
    def sizes(self) -> List[int]:
        return [int(g.shape[0]) for g in self.groups]

    @property
    def pivot(self) -> np.ndarray:
        """Samples of group k, the canonical denominator."""
        return self.groups[-1]

    def pooled(self) -> np.ndarray:
        """All samples stacked in group order (the empirical mixture)."""
        return np.vstack(self.groups)

    def permuted(self, order: Sequence[int]) -> "GroupedDataset":
        """Reorder groups; order[j] is the 0-based source index of new group j."""
        order = list(order)
        if sorted(order) != list(range(self.k)):
            raise InvalidInputError(f"order must be a permutation of 0..{self.k - 1}")
        return GroupedDataset(groups=[self.groups[j] for j in order])

    def with_pivot(self, index: int) -> "GroupedDataset":
        """Move the 1-based group `index` to the last (pivot) position."""
        if not 1 <= index <= self.k:
            raise InvalidInputError(f"pivot must be in 1..{self.k}, got {index}")
        order = [j for j in range(self.k) if j != index - 1] + [index - 1]
        return self.permuted(order)

    def subset(self, minibatch: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Rows selected by one index set per group."""
        return [g[np.asarray(idx, dtype=int)] for g, idx in zip(self.groups, minibatch)]


class DiscreteExperiment(BaseModel):
    """
    k explicit distributions over a finite support of m points, with a prior.

    Used for exact (sampling-free) expectations.
    """

    model_config = ConfigDict(frozen=True)

    prior: Prior
    conditionals: List[List[float]] = Field(description="k probability vectors of length m")

    @model_validator(mode="after")
    def validate_conditionals(self) -> "DiscreteExperiment":
        arr = np.asarray(self.conditionals, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != self.prior.k:
            raise InvalidInputError(
                f"need {self.prior.k} conditionals of equal length, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise InvalidInputError("conditional masses must be strictly positive")
        if np.any(np.abs(arr.sum(axis=1) - 1.0) > PRIOR_ATOL):
            raise InvalidInputError("each conditional must sum to 1")
        return self

    @property
    def k(self) -> int:
        return self.prior.k

    @property
    def m(self) -> int:
        return len(self.conditionals[0])

    @property
    def array(self) -> np.ndarray:
        """Conditionals as a (k, m) array."""
        return np.asarray(self.conditionals, dtype=float)

    def mixture(self) -> np.ndarray:
        """M(x) = sum_i pi_i p_i(x), shape (m,)."""
        return self.prior.array @ self.array

    def posterior(self) -> np.ndarray:
        """eta(x)_i = pi_i p_i(x) / M(x), shape (m, k)."""
        joint = self.prior.array[:, None] * self.array
        return (joint / joint.sum(axis=0, keepdims=True)).T

    def true_ratios(self) -> np.ndarray:
        """Canonical ratios p_i(x) / p_k(x), shape (m, k-1)."""
        P = self.array
        return (P[:-1] / P[-1][None, :]).T
