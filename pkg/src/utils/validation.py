"""
Validation Utilities

Shape and value checks for the numeric value types: Points, RatioVectors,
ProbabilityVectors and per-group index sets. Single vectors are promoted to
batches of one row so every service works on 2-D arrays.
"""

from typing import List, Optional, Sequence

import numpy as np

from src.exceptions import DimensionMismatchError, InvalidInputError

SIMPLEX_ATOL = 1e-12


def as_points(x: np.ndarray, dim: Optional[int] = None) -> np.ndarray:
    """
    Validate a point or a batch of points.

    Args:
        x: Array of shape (d,) or (n, d)
        dim: Expected dimension d, if known

    Returns:
        Float array of shape (n, d)
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionMismatchError(f"points must be 1-D or 2-D, got ndim={arr.ndim}")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatchError(
            f"points have dimension {arr.shape[1]}, expected {dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("points must have finite coordinates")
    return arr


def as_ratio_vectors(r: np.ndarray, k: Optional[int] = None) -> np.ndarray:
    """
    Validate canonical ratio vectors (r_1, ..., r_{k-1}); r_k = 1 is implicit.

    Args:
        r: Array of shape (k-1,) or (n, k-1)
        k: Number of distributions, if known

    Returns:
        Float array of shape (n, k-1)
    """
    arr = np.asarray(r, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise DimensionMismatchError(f"ratio vectors must have shape (n, k-1), got {arr.shape}")
    if k is not None and arr.shape[1] != k - 1:
        raise DimensionMismatchError(
            f"ratio vectors have {arr.shape[1]} entries, expected k-1={k - 1}"
        )
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise InvalidInputError("ratio entries must be finite and strictly positive")
    return arr


def as_probability_vectors(
    eta: np.ndarray,
    k: Optional[int] = None,
    strictly_positive: bool = False,
) -> np.ndarray:
    """
    Validate class-probability vectors on the k-simplex.

    Args:
        eta: Array of shape (k,) or (n, k)
        k: Number of classes, if known
        strictly_positive: Reject zero entries

    Returns:
        Float array of shape (n, k)
    """
    arr = np.asarray(eta, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise DimensionMismatchError(f"probability vectors must have shape (n, k), got {arr.shape}")
    if k is not None and arr.shape[1] != k:
        raise DimensionMismatchError(
            f"probability vectors have {arr.shape[1]} entries, expected k={k}"
        )
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise InvalidInputError("probabilities must be finite and nonnegative")
    if np.any(np.abs(arr.sum(axis=1) - 1.0) > SIMPLEX_ATOL):
        raise InvalidInputError("probability vectors must sum to 1 within 1e-12")
    if strictly_positive and np.any(arr <= 0.0):
        raise InvalidInputError("probability vectors must be strictly positive")
    return arr


def validate_minibatch(
    minibatch: Sequence[np.ndarray],
    group_sizes: Sequence[int],
) -> List[np.ndarray]:
    """
    Validate one index set per group.

    Args:
        minibatch: Sequence of k integer index arrays
        group_sizes: Number of samples in each group

    Returns:
        List of int arrays
    """
    if len(minibatch) != len(group_sizes):
        raise DimensionMismatchError(
            f"minibatch has {len(minibatch)} index sets for {len(group_sizes)} groups"
        )
    result = []
    for i, (idx, n) in enumerate(zip(minibatch, group_sizes)):
        arr = np.asarray(idx, dtype=int).ravel()
        if arr.size == 0:
            raise InvalidInputError(f"minibatch index set for group {i + 1} is empty")
        if arr.min() < 0 or arr.max() >= n:
            raise InvalidInputError(f"minibatch index out of range for group {i + 1}")
        result.append(arr)
    return result

