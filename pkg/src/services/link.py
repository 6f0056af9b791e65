"""
Link Functions

Bijection between class-probability vectors η on the k-simplex and canonical
density-ratio vectors r = (p_1/p_k, ..., p_{k-1}/p_k), parametrised by the
class prior π:

    r_i = (π_k / π_i) · (η_i / η_k)            (forward)
    η_i = π_i r_i / Σ_j π_j r_j,  r_k = 1       (inverse)
"""

import numpy as np
from loguru import logger
from scipy.special import logsumexp

from src.exceptions import DimensionMismatchError, InvalidDatasetError, ZeroProbabilityError
from src.schemas.core import GroupedDataset, Prior
from src.utils.validation import as_probability_vectors, as_ratio_vectors


def estimate_prior(dataset: GroupedDataset) -> Prior:
    """
    Estimate class priors from group sizes, π_i = n_i / Σ_j n_j.

    Args:
        dataset: Grouped samples

    Returns:
        Prior
    """
    sizes = np.asarray(dataset.sizes, dtype=float)
    if np.any(sizes <= 0):
        raise InvalidDatasetError("every group must be nonempty to estimate a prior")
    weights = sizes / sizes.sum()
    # renormalise so the float sum is exactly representable as 1
    weights = weights / weights.sum()
    return Prior(weights=list(weights))


def link_forward(
    eta: np.ndarray,
    prior: Prior,
    allow_zero_ratio: bool = False,
) -> np.ndarray:
    """
    Map class probabilities to canonical density ratios.

    Args:
        eta: ProbabilityVector(s), shape (k,) or (n, k)
        prior: Class prior
        allow_zero_ratio: Map η_i = 0 (i < k) to r_i = 0 instead of raising

    Returns:
        Ratio array with the input's batch shape, last axis k-1
    """
    single = np.ndim(eta) == 1
    arr = as_probability_vectors(eta, k=prior.k)
    if np.any(arr[:, -1] <= 0.0):
        raise ZeroProbabilityError("eta_k = 0: the pivot probability must be positive")
    zero = arr[:, :-1] <= 0.0
    if np.any(zero) and not allow_zero_ratio:
        raise ZeroProbabilityError(
            "eta_i = 0 gives a zero ratio; pass allow_zero_ratio=True to accept it"
        )
    pi = prior.array
    r = (pi[-1] / pi[:-1])[None, :] * (arr[:, :-1] / arr[:, -1:])
    if np.any(zero):
        logger.warning(f"link_forward mapped {int(zero.sum())} zero probabilities to zero ratios")
    return r[0] if single else r


def link_inverse(r: np.ndarray, prior: Prior) -> np.ndarray:
    """
    Map canonical density ratios to class probabilities.

    Evaluated in log space so the output stays on the simplex for any ratio
    magnitude.

    Args:
        r: RatioVector(s), shape (k-1,) or (n, k-1)
        prior: Class prior

    Returns:
        Probability array of shape (k,) or (n, k)
    """
    single = np.ndim(r) == 1
    arr = as_ratio_vectors(r, k=prior.k)
    eta = link_inverse_unchecked(arr, prior.array)
    return eta[0] if single else eta


def link_inverse_unchecked(r: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """link_inverse on a validated (n, k-1) batch with prior array pi."""
    if r.shape[1] != pi.size - 1:
        raise DimensionMismatchError(f"ratio width {r.shape[1]} does not match k-1={pi.size - 1}")
    log_w = np.log(pi)[None, :] + np.concatenate(
        [np.log(r), np.zeros((r.shape[0], 1))], axis=1
    )
    log_eta = log_w - logsumexp(log_w, axis=1, keepdims=True)
    eta = np.exp(log_eta)
    return eta / eta.sum(axis=1, keepdims=True)


def extend_ratios(r: np.ndarray) -> np.ndarray:
    """Append the implicit r_k = 1 column to an (n, k-1) ratio batch."""
    r = np.asarray(r, dtype=float)
    return np.concatenate([r, np.ones(r.shape[:-1] + (1,))], axis=-1)
