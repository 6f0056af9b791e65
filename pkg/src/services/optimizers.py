"""
First-Order Optimizers

SGD and Adam updates on a flat parameter vector.
"""

from abc import ABC, abstractmethod

import numpy as np

from src.schemas.config import OptimizerConfig, OptimizerMethod


class Optimizer(ABC):
    """Stateful update rule: step(theta, grad) returns the new parameters."""

    def __init__(self, lr: float):
        self.lr = float(lr)
        self.t = 0

    @abstractmethod
    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        pass


class SGD(Optimizer):
    """Plain gradient descent with a constant step."""

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        return theta - self.lr * grad


class Adam(Optimizer):
    """Adam with bias-corrected moment estimates."""

    def __init__(
        self,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        super().__init__(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = None
        self.v = None

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1

        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t

        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grad * grad)

        denom = np.sqrt(self.v / bc2) + self.epsilon
        return theta - (self.lr / bc1) * self.m / denom


def make_optimizer(cfg: OptimizerConfig) -> Optimizer:
    """Optimizer for a configuration."""
    if cfg.method == OptimizerMethod.SGD:
        return SGD(cfg.step_size)
    return Adam(cfg.step_size, cfg.beta1, cfg.beta2, cfg.epsilon)
