"""
Feature Maps

Basis expansions phi: R^d -> R^m for log-linear ratio models.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np
from loguru import logger
from scipy.spatial.distance import pdist
from sklearn.metrics.pairwise import rbf_kernel

from src.exceptions import InvalidInputError
from src.schemas.config import FeatureKind
from src.schemas.core import GroupedDataset
from src.utils.rng import make_rng


class FeatureMap(ABC):
    """Fixed (non-trainable) feature map."""

    kind: FeatureKind

    def __init__(self, dim: int):
        self.dim = int(dim)

    @property
    @abstractmethod
    def output_dim(self) -> int:
        pass

    @abstractmethod
    def transform(self, X: np.ndarray) -> np.ndarray:
        """(n, d) points -> (n, m) features."""
        pass

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "dim": self.dim}


class IdentityFeatures(FeatureMap):
    kind = FeatureKind.IDENTITY

    @property
    def output_dim(self) -> int:
        return self.dim

    def transform(self, X: np.ndarray) -> np.ndarray:
        return X


class PolynomialFeatures(FeatureMap):
    """Per-coordinate powers x_j, x_j^2, ..., x_j^degree (no cross terms)."""

    kind = FeatureKind.POLY

    def __init__(self, dim: int, degree: int = 2):
        super().__init__(dim)
        if degree < 1:
            raise InvalidInputError(f"polynomial degree must be >= 1, got {degree}")
        self.degree = int(degree)

    @property
    def output_dim(self) -> int:
        return self.dim * self.degree

    def transform(self, X: np.ndarray) -> np.ndarray:
        return np.concatenate([X ** p for p in range(1, self.degree + 1)], axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "degree": self.degree}


class RBFFeatures(FeatureMap):
    """Gaussian kernel features exp(-||x - c_j||^2 / (2 sigma^2))."""

    kind = FeatureKind.RBF

    def __init__(self, centers: np.ndarray, bandwidth: float):
        centers = np.array(centers, dtype=float)
        if centers.ndim != 2 or centers.shape[0] == 0:
            raise InvalidInputError("RBF centers must be a nonempty (m, d) array")
        if not np.isfinite(bandwidth) or bandwidth <= 0:
            raise InvalidInputError(f"RBF bandwidth must be positive, got {bandwidth}")
        super().__init__(centers.shape[1])
        self.centers = centers
        self.centers.setflags(write=False)
        self.bandwidth = float(bandwidth)

    @property
    def output_dim(self) -> int:
        return int(self.centers.shape[0])

    def transform(self, X: np.ndarray) -> np.ndarray:
        return rbf_kernel(X, self.centers, gamma=1.0 / (2.0 * self.bandwidth ** 2))

    def to_dict(self) -> Dict[str, Any]:
        return {
            **super().to_dict(),
            "bandwidth": self.bandwidth,
            "centers": self.centers.tolist(),
        }


def median_bandwidth(centers: np.ndarray) -> float:
    """Median pairwise distance among centers, 1.0 when degenerate."""
    if centers.shape[0] < 2:
        return 1.0
    sigma = float(np.median(pdist(centers)))
    return sigma if sigma > 0 and np.isfinite(sigma) else 1.0


def build_rbf_features(
    dataset: GroupedDataset,
    n_centers: int = 100,
    bandwidth: Optional[float] = None,
    seed: int = 0,
) -> RBFFeatures:
    """
    Pick RBF centers from the pivot group.

    Args:
        dataset: Training data; centers are drawn from group k
        n_centers: Maximum number of centers
        bandwidth: Fixed bandwidth, median heuristic when None
        seed: Run seed (uses the "centers" stream)
    """
    pivot = dataset.pivot
    m = min(int(n_centers), pivot.shape[0])
    rng = make_rng(seed, "centers")
    idx = np.sort(rng.choice(pivot.shape[0], size=m, replace=False))
    centers = pivot[idx]
    sigma = median_bandwidth(centers) if bandwidth is None else float(bandwidth)
    logger.debug(f"RBF features: {m} centers, bandwidth={sigma:.4g}")
    return RBFFeatures(centers, sigma)


def feature_map_from_dict(doc: Dict[str, Any]) -> FeatureMap:
    """Rebuild a feature map from its checkpoint description."""
    try:
        kind = FeatureKind(doc["kind"])
        if kind == FeatureKind.IDENTITY:
            return IdentityFeatures(int(doc["dim"]))
        if kind == FeatureKind.POLY:
            return PolynomialFeatures(int(doc["dim"]), int(doc["degree"]))
        return RBFFeatures(np.asarray(doc["centers"], dtype=float), float(doc["bandwidth"]))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"invalid feature map description: {e}")
