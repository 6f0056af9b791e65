"""
Multilayer Perceptron Ratio Model

Fully connected network with rectifier hidden layers whose linear output is
the log-ratio pre-activation.
"""

from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from src.exceptions import InvalidInputError
from src.models.base import DEFAULT_CLAMP, RatioModel


class MlpModel(RatioModel):
    """
    Layers [d, h_1, ..., h_L, k-1]; ReLU on hidden layers.

    Parameters flatten layer by layer as W_l (out x in, row-major) then b_l.
    """

    kind = "mlp"

    def __init__(
        self,
        dim: int,
        k: int,
        hidden: Sequence[int] = (32, 32),
        clamp: float = DEFAULT_CLAMP,
    ):
        super().__init__(dim, k, clamp)
        hidden = [int(h) for h in hidden]
        if any(h < 1 for h in hidden):
            raise InvalidInputError(f"hidden widths must be positive, got {hidden}")
        self.hidden = hidden
        self.sizes = [self.dim] + hidden + [self.k - 1]
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(np.zeros((fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    def initialize(self, rng: np.random.Generator) -> None:
        """Fan-in scaled uniform weights; the output layer starts at zero."""
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            bound = 1.0 / np.sqrt(W.shape[1])
            W[...] = rng.uniform(-bound, bound, size=W.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        self.weights[-1][...] = 0.0
        self.biases[-1][...] = 0.0

    def _param_arrays(self) -> Tuple[np.ndarray, ...]:
        arrays: List[np.ndarray] = []
        for W, b in zip(self.weights, self.biases):
            arrays.extend([W, b])
        return tuple(arrays)

    def copy(self) -> "MlpModel":
        other = MlpModel(self.dim, self.k, self.hidden, self.clamp)
        other.set_params(self.get_params())
        return other

    def _preactivation(self, X: np.ndarray) -> Tuple[np.ndarray, Any]:
        activations = [X]
        pre = []
        a = X
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W.T + b[None, :]
            pre.append(z)
            a = z if l == last else np.maximum(z, 0.0)
            activations.append(a)
        return a, (activations, pre)

    def _backward_pre(self, cache: Any, dG: np.ndarray) -> np.ndarray:
        activations, pre = cache
        grads: List[np.ndarray] = []
        delta = dG
        for l in range(len(self.weights) - 1, -1, -1):
            grads.append(delta.sum(axis=0))
            grads.append((delta.T @ activations[l]).ravel())
            if l > 0:
                delta = (delta @ self.weights[l]) * (pre[l - 1] > 0.0)
        # collected as b_L, W_L, ..., b_1, W_1
        return np.concatenate(grads[::-1])

    def _jacobian_pre(self, cache: Any) -> np.ndarray:
        activations, pre = cache
        n = activations[0].shape[0]
        out = self.k - 1
        J = np.zeros((n, out, self.n_params))
        for i in range(out):
            delta = np.zeros((n, out))
            delta[:, i] = 1.0
            blocks: List[np.ndarray] = []
            for l in range(len(self.weights) - 1, -1, -1):
                blocks.append(delta)
                blocks.append(
                    (delta[:, :, None] * activations[l][:, None, :]).reshape(n, -1)
                )
                if l > 0:
                    delta = (delta @ self.weights[l]) * (pre[l - 1] > 0.0)
            J[:, i, :] = np.concatenate(blocks[::-1], axis=1)
        return J

    def to_dict(self) -> Dict[str, Any]:
        shapes = []
        for W, b in zip(self.weights, self.biases):
            shapes.append({"W": list(W.shape), "b": list(b.shape)})
        return {
            "kind": self.kind,
            "dim": self.dim,
            "k": self.k,
            "clamp": self.clamp,
            "hidden": self.hidden,
            "activation": "relu",
            "shapes": shapes,
            "params": self.get_params().tolist(),
        }
