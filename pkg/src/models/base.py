"""
Base Ratio Model

Abstract base class for parametric density-ratio models. A model computes a
pre-activation g(x) in R^{k-1} and outputs r(x) = exp(clip(g(x), -L, L)), so
every coordinate lies in [e^-L, e^L].
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Tuple

import numpy as np

from src.exceptions import InvalidInputError
from src.utils.validation import as_points

DEFAULT_CLAMP = 30.0


class RatioModel(ABC):
    """
    Parametric map x -> (r_1(x), ..., r_{k-1}(x)) with parameter Jacobians.

    Subclasses hold their parameters as arrays and implement the
    pre-activation, its backward pass and its per-sample Jacobian. The base
    class adds the exponential output and the clamp.

    Attributes:
        dim: Input dimension d
        k: Number of distributions
        clamp: Log-ratio bound L
    """

    kind: str = "base"

    def __init__(self, dim: int, k: int, clamp: float = DEFAULT_CLAMP):
        if dim < 1 or k < 2:
            raise InvalidInputError(f"invalid model shape dim={dim}, k={k}")
        if not np.isfinite(clamp) or clamp <= 0:
            raise InvalidInputError(f"clamp must be positive, got {clamp}")
        self.dim = int(dim)
        self.k = int(k)
        self.clamp = float(clamp)

    # -------------------------------------------------------------------------
    # Parameters
    # -------------------------------------------------------------------------

    @abstractmethod
    def _param_arrays(self) -> Tuple[np.ndarray, ...]:
        """Parameter arrays in flattening order."""
        pass

    @property
    def n_params(self) -> int:
        return int(sum(a.size for a in self._param_arrays()))

    def get_params(self) -> np.ndarray:
        """Copy of all parameters as one flat row-major vector."""
        return np.concatenate([a.ravel() for a in self._param_arrays()])

    def set_params(self, theta: np.ndarray) -> None:
        """Overwrite parameters in place from a flat vector."""
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.n_params:
            raise InvalidInputError(f"expected {self.n_params} parameters, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise InvalidInputError("parameters must be finite")
        offset = 0
        for a in self._param_arrays():
            a[...] = theta[offset:offset + a.size].reshape(a.shape)
            offset += a.size

    @abstractmethod
    def copy(self) -> "RatioModel":
        pass

    # -------------------------------------------------------------------------
    # Pre-activation (implemented by subclasses)
    # -------------------------------------------------------------------------

    @abstractmethod
    def _preactivation(self, X: np.ndarray) -> Tuple[np.ndarray, Any]:
        """Return g(X) of shape (n, k-1) and a cache for the backward pass."""
        pass

    @abstractmethod
    def _backward_pre(self, cache: Any, dG: np.ndarray) -> np.ndarray:
        """Pull dL/dg of shape (n, k-1) back to a flat parameter gradient."""
        pass

    @abstractmethod
    def _jacobian_pre(self, cache: Any) -> np.ndarray:
        """Per-sample dg_i/dtheta_p, shape (n, k-1, P)."""
        pass

    # -------------------------------------------------------------------------
    # Public evaluation
    # -------------------------------------------------------------------------

    def forward(self, X: np.ndarray) -> Tuple[np.ndarray, Any]:
        """
        Evaluate ratios and keep what the backward pass needs.

        Returns:
            (r, state) with r of shape (n, k-1)
        """
        X = as_points(X, dim=self.dim)
        G, cache = self._preactivation(X)
        with np.errstate(invalid="ignore"):
            active = (G > -self.clamp) & (G < self.clamp)
        r = np.exp(np.clip(G, -self.clamp, self.clamp))
        return r, (cache, r, active)

    def backward(self, state: Any, dR: np.ndarray) -> np.ndarray:
        """
        Vector-Jacobian product: sum_n sum_i dR[n, i] * dr_i(x_n)/dtheta.

        Clamped coordinates contribute nothing.
        """
        cache, r, active = state
        return self._backward_pre(cache, np.where(active, dR * r, 0.0))

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Ratios r(x), shape (n, k-1); a single point gives shape (k-1,)."""
        single = np.ndim(X) == 1
        r, _ = self.forward(X)
        return r[0] if single else r

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        """dr_i/dtheta_p, shape (k-1, P) for one point or (n, k-1, P) for a batch."""
        single = np.ndim(X) == 1
        X = as_points(X, dim=self.dim)
        G, cache = self._preactivation(X)
        active = (G > -self.clamp) & (G < self.clamp)
        r = np.exp(np.clip(G, -self.clamp, self.clamp))
        J = self._jacobian_pre(cache) * np.where(active, r, 0.0)[:, :, None]
        return J[0] if single else J

    def vjp(self, X: np.ndarray, dR: np.ndarray) -> np.ndarray:
        """backward(forward(X), dR)."""
        _, state = self.forward(X)
        return self.backward(state, np.asarray(dR, dtype=float))

    # -------------------------------------------------------------------------
    # Serialization
    # -------------------------------------------------------------------------

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Checkpoint document: kind, shapes, flat parameters, clamp."""
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim}, k={self.k}, n_params={self.n_params})"
