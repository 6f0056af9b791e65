"""
Log-Linear Ratio Model

log r_i(x) = <w_i, phi(x)> + b_i over a fixed feature map.
"""

from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.models.base import DEFAULT_CLAMP, RatioModel
from src.models.features import FeatureMap, IdentityFeatures


class LogLinearModel(RatioModel):
    """
    Log-linear model over features.

    Parameters flatten as W ((k-1) x m, row-major) followed by b (k-1).
    Zero parameters give r = 1 everywhere.
    """

    kind = "loglinear"

    def __init__(
        self,
        dim: int,
        k: int,
        features: Optional[FeatureMap] = None,
        clamp: float = DEFAULT_CLAMP,
    ):
        super().__init__(dim, k, clamp)
        self.features = features if features is not None else IdentityFeatures(dim)
        m = self.features.output_dim
        self.W = np.zeros((k - 1, m))
        self.b = np.zeros(k - 1)

    def _param_arrays(self) -> Tuple[np.ndarray, ...]:
        return (self.W, self.b)

    def copy(self) -> "LogLinearModel":
        other = LogLinearModel(self.dim, self.k, self.features, self.clamp)
        other.W[...] = self.W
        other.b[...] = self.b
        return other

    def _preactivation(self, X: np.ndarray) -> Tuple[np.ndarray, Any]:
        phi = self.features.transform(X)
        return phi @ self.W.T + self.b[None, :], phi

    def _backward_pre(self, cache: Any, dG: np.ndarray) -> np.ndarray:
        phi = cache
        return np.concatenate([(dG.T @ phi).ravel(), dG.sum(axis=0)])

    def _jacobian_pre(self, cache: Any) -> np.ndarray:
        phi = cache
        n, m = phi.shape
        out = self.k - 1
        J = np.zeros((n, out, self.n_params))
        for i in range(out):
            J[:, i, i * m:(i + 1) * m] = phi
            J[:, i, out * m + i] = 1.0
        return J

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "k": self.k,
            "clamp": self.clamp,
            "feature_map": self.features.to_dict(),
            "shapes": {"W": list(self.W.shape), "b": list(self.b.shape)},
            "params": self.get_params().tolist(),
        }
