"""
Convex Objectives

Strictly convex functions f: R_+^{k-1} -> R, their Bregman divergences and the
empirical multi-distribution DRE loss

    E_{p_k}[<grad f(r), r> - f(r)] - sum_{i<k} E_{p_i}[d_i f(r)]

with analytic parameter gradients. Every kind supplies value, gradient and a
Hessian-vector product; the loss gradient needs nothing else.

All methods work on (n, k-1) batches of ratio vectors.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.special import logsumexp, softmax

from src.exceptions import DimensionMismatchError, InvalidInputError
from src.schemas.core import GroupedDataset, Prior
from src.utils.numerics import safe_log
from src.utils.validation import as_ratio_vectors, validate_minibatch

if TYPE_CHECKING:
    from src.models.base import RatioModel


class ObjectiveKind(str, Enum):
    """Named convex functions."""
    MULTILR = "multilr"
    LSIF = "lsif"
    KLIEP = "kliep"
    POWER = "power"
    QUADRATIC = "quadratic"
    LOGSUMEXP = "logsumexp"

    def __str__(self) -> str:
        return self.value


# Defaults used when no alpha is configured
DEFAULT_ALPHA = {
    ObjectiveKind.POWER: 1.5,
    ObjectiveKind.LOGSUMEXP: 5.0,
}


class ConvexObjective(ABC):
    """
    Contract for a convex function on canonical ratio vectors.

    Subclasses implement value, gradient and hessian_vector on (n, k-1)
    batches; bregman has a generic implementation that kinds with a closed
    form override.
    """

    kind: str = ""

    def __init__(self, k: int):
        if int(k) < 2:
            raise InvalidInputError(f"k must be at least 2, got {k}")
        self.k = int(k)

    @property
    def width(self) -> int:
        """Length k-1 of a ratio vector."""
        return self.k - 1

    @abstractmethod
    def value(self, r: np.ndarray) -> np.ndarray:
        """f(r) per row, shape (n,)."""
        pass

    @abstractmethod
    def gradient(self, r: np.ndarray) -> np.ndarray:
        """grad f(r) per row, shape (n, k-1)."""
        pass

    @abstractmethod
    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Hessian of f at r applied to v, row by row."""
        pass

    def bregman(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """B_f(x, y) per row; exactly zero on identical rows."""
        out = self._bregman(x, y)
        same = np.all(x == y, axis=1)
        out = np.where(same, 0.0, out)
        return out

    def _bregman(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.value(x) - self.value(y) - np.sum(self.gradient(y) * (x - y), axis=1)

    def params(self) -> Dict[str, Any]:
        """Parameters echoed in reports."""
        return {"kind": str(self.kind), "k": self.k}

    def __repr__(self) -> str:
        args = ", ".join(f"{key}={val!r}" for key, val in self.params().items())
        return f"{type(self).__name__}({args})"


class MultiLRObjective(ConvexObjective):
    """
    Multi-class logistic regression.

    With w = pi * (r, 1) and S = sum(w):
        f(r) = sum_i w_i log w_i - S log S
    For a uniform prior this is (1/k) sum_i r_i log(r_i / sum_j r_j).
    """

    kind = ObjectiveKind.MULTILR

    def __init__(self, k: int, prior: Optional[Prior] = None):
        super().__init__(k)
        if prior is None:
            prior = Prior.uniform(k)
        if prior.k != k:
            raise DimensionMismatchError(f"prior has {prior.k} weights, expected k={k}")
        self.prior = prior
        self._pi = prior.array

    def _weights(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        w = np.concatenate([r * self._pi[None, :-1], np.full((r.shape[0], 1), self._pi[-1])], axis=1)
        return w, w.sum(axis=1)

    def value(self, r: np.ndarray) -> np.ndarray:
        w, s = self._weights(r)
        return np.sum(w * safe_log(w), axis=1) - s * safe_log(s)

    def gradient(self, r: np.ndarray) -> np.ndarray:
        w, s = self._weights(r)
        return self._pi[None, :-1] * (safe_log(w[:, :-1]) - safe_log(s)[:, None])

    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        pi = self._pi[None, :-1]
        _, s = self._weights(r)
        return pi * v / r - pi * (np.sum(pi * v, axis=1) / s)[:, None]

    def params(self) -> Dict[str, Any]:
        out = super().params()
        if not self.prior.is_uniform():
            out["prior"] = self.prior.weights
        return out


class LSIFObjective(ConvexObjective):
    """Least-squares importance fitting, f(r) = 1/2 ||r - 1||^2."""

    kind = ObjectiveKind.LSIF

    def value(self, r: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum((r - 1.0) ** 2, axis=1)

    def gradient(self, r: np.ndarray) -> np.ndarray:
        return r - 1.0

    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.array(v, dtype=float, copy=True)

    def _bregman(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum((x - y) ** 2, axis=1)


class KLIEPObjective(ConvexObjective):
    """KL importance estimation, f(r) = <r, log r> - ||r||_1."""

    kind = ObjectiveKind.KLIEP

    def value(self, r: np.ndarray) -> np.ndarray:
        return np.sum(r * safe_log(r) - r, axis=1)

    def gradient(self, r: np.ndarray) -> np.ndarray:
        return safe_log(r)

    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        return v / r

    def _bregman(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.sum(x * (safe_log(x) - safe_log(y)) - x + y, axis=1)


class PowerObjective(ConvexObjective):
    """Power divergence, f(r) = ||r||_alpha^alpha with alpha > 1."""

    kind = ObjectiveKind.POWER

    def __init__(self, k: int, alpha: float = DEFAULT_ALPHA[ObjectiveKind.POWER]):
        super().__init__(k)
        alpha = float(alpha)
        if not np.isfinite(alpha) or alpha <= 1.0:
            raise InvalidInputError(f"power objective needs alpha > 1, got {alpha}")
        self.alpha = alpha

    def value(self, r: np.ndarray) -> np.ndarray:
        return np.sum(r ** self.alpha, axis=1)

    def gradient(self, r: np.ndarray) -> np.ndarray:
        return self.alpha * r ** (self.alpha - 1.0)

    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        a = self.alpha
        return a * (a - 1.0) * r ** (a - 2.0) * v

    def _bregman(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        a = self.alpha
        if a == 2.0:
            return np.sum((x - y) ** 2, axis=1)
        # y^a [(t^a - 1) - a (t - 1)] with t = x / y
        t = x / y
        inner = np.expm1(a * np.log(t)) - a * (t - 1.0)
        return np.sum(y ** a * inner, axis=1)

    def params(self) -> Dict[str, Any]:
        return {**super().params(), "alpha": self.alpha}


class QuadraticObjective(ConvexObjective):
    """f(r) = r^T H r + q^T r for symmetric positive-definite H."""

    kind = ObjectiveKind.QUADRATIC

    def __init__(self, k: int, H: Optional[np.ndarray] = None, q: Optional[np.ndarray] = None):
        super().__init__(k)
        m = self.width
        if H is None:
            H = 0.5 * (np.eye(m) + np.ones((m, m)))
        if q is None:
            q = np.zeros(m)
        H = np.atleast_2d(np.array(H, dtype=float))
        q = np.array(q, dtype=float).ravel()
        if H.shape != (m, m) or q.shape != (m,):
            raise DimensionMismatchError(
                f"quadratic objective needs H of shape ({m}, {m}) and q of length {m}, "
                f"got {H.shape} and {q.shape}"
            )
        if not np.all(np.isfinite(H)) or not np.all(np.isfinite(q)):
            raise InvalidInputError("quadratic H and q must be finite")
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12):
            raise InvalidInputError("quadratic H must be symmetric")
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise InvalidInputError("quadratic H must be positive definite")
        self.H = H
        self.q = q
        self.H.setflags(write=False)
        self.q.setflags(write=False)

    def value(self, r: np.ndarray) -> np.ndarray:
        return np.einsum("ni,ij,nj->n", r, self.H, r) + r @ self.q

    def gradient(self, r: np.ndarray) -> np.ndarray:
        return 2.0 * r @ self.H + self.q[None, :]

    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        return 2.0 * v @ self.H

    def _bregman(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = x - y
        return np.einsum("ni,ij,nj->n", d, self.H, d)

    def params(self) -> Dict[str, Any]:
        return {**super().params(), "H": self.H.tolist(), "q": self.q.tolist()}


class LogSumExpObjective(ConvexObjective):
    """
    f(r) = alpha * log(sum_i exp(r_i / alpha)).

    Affine along the diagonal, so minimisers of the induced loss need not be
    unique.
    """

    kind = ObjectiveKind.LOGSUMEXP

    def __init__(self, k: int, alpha: float = DEFAULT_ALPHA[ObjectiveKind.LOGSUMEXP]):
        super().__init__(k)
        alpha = float(alpha)
        if not np.isfinite(alpha) or alpha <= 0.0:
            raise InvalidInputError(f"logsumexp objective needs alpha > 0, got {alpha}")
        self.alpha = alpha

    def value(self, r: np.ndarray) -> np.ndarray:
        return self.alpha * logsumexp(r / self.alpha, axis=1)

    def gradient(self, r: np.ndarray) -> np.ndarray:
        return softmax(r / self.alpha, axis=1)

    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        s = softmax(r / self.alpha, axis=1)
        return (s * v - s * np.sum(s * v, axis=1, keepdims=True)) / self.alpha

    def params(self) -> Dict[str, Any]:
        return {**super().params(), "alpha": self.alpha}


class NormalizedObjective(ConvexObjective):
    """
    f~(r) = B_f(r, 1): vanishes with zero gradient at the unit vector.

    Differs from f by an affine term, so Hessians and Bregman divergences are
    unchanged and the DRE loss shifts by a constant.
    """

    def __init__(self, base: ConvexObjective):
        super().__init__(base.k)
        self.base = base
        self.kind = base.kind
        ones = np.ones((1, self.width))
        self._f1 = float(base.value(ones)[0])
        self._g1 = base.gradient(ones)[0]

    def value(self, r: np.ndarray) -> np.ndarray:
        return self.base.value(r) - self._f1 - (r - 1.0) @ self._g1

    def gradient(self, r: np.ndarray) -> np.ndarray:
        return self.base.gradient(r) - self._g1[None, :]

    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.base.hessian_vector(r, v)

    def _bregman(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.base._bregman(x, y)

    def params(self) -> Dict[str, Any]:
        return {**self.base.params(), "normalized": True}


def make_objective(
    kind: str,
    k: int,
    alpha: Optional[float] = None,
    H: Optional[np.ndarray] = None,
    q: Optional[np.ndarray] = None,
    prior: Optional[Prior] = None,
) -> ConvexObjective:
    """
    Build a convex objective by name.

    Args:
        kind: One of multilr, lsif, kliep, power, quadratic, logsumexp
        k: Number of distributions
        alpha: Power / LogSumExp parameter (kind default when omitted)
        H: Quadratic matrix
        q: Quadratic vector
        prior: MultiLR prior (uniform when omitted)

    Returns:
        ConvexObjective
    """
    try:
        kind = ObjectiveKind(str(kind).lower())
    except ValueError:
        names = ", ".join(item.value for item in ObjectiveKind)
        raise InvalidInputError(f"unknown objective '{kind}', expected one of: {names}")

    if kind == ObjectiveKind.MULTILR:
        obj = MultiLRObjective(k, prior=prior)
    elif kind == ObjectiveKind.LSIF:
        obj = LSIFObjective(k)
    elif kind == ObjectiveKind.KLIEP:
        obj = KLIEPObjective(k)
    elif kind == ObjectiveKind.POWER:
        obj = PowerObjective(k, DEFAULT_ALPHA[kind] if alpha is None else alpha)
    elif kind == ObjectiveKind.QUADRATIC:
        obj = QuadraticObjective(k, H=H, q=q)
    else:
        obj = LogSumExpObjective(k, DEFAULT_ALPHA[kind] if alpha is None else alpha)

    logger.info(f"ConvexObjective initialized: {obj!r}")
    return obj


# =============================================================================
# Single-vector operations
# =============================================================================

def _batch(obj: ConvexObjective, r: np.ndarray) -> Tuple[np.ndarray, bool]:
    return as_ratio_vectors(r, k=obj.k), np.ndim(r) == 1


def f_value(obj: ConvexObjective, r: np.ndarray):
    """f(r) for one ratio vector (float) or a batch (array)."""
    arr, single = _batch(obj, r)
    out = obj.value(arr)
    return float(out[0]) if single else out


def f_gradient(obj: ConvexObjective, r: np.ndarray) -> np.ndarray:
    """grad f(r), shape (k-1,) or (n, k-1)."""
    arr, single = _batch(obj, r)
    out = obj.gradient(arr)
    return out[0] if single else out


def bregman(obj: ConvexObjective, x: np.ndarray, y: np.ndarray):
    """Bregman divergence B_f(x, y); nonnegative and zero when x == y."""
    xa, single = _batch(obj, x)
    ya, _ = _batch(obj, y)
    if xa.shape != ya.shape:
        raise DimensionMismatchError(f"bregman arguments differ in shape: {xa.shape} vs {ya.shape}")
    out = obj.bregman(xa, ya)
    return float(out[0]) if single else out


# =============================================================================
# Empirical DRE loss
# =============================================================================

@dataclass(frozen=True)
class LossBatch:
    """Model outputs r(x) at each group's sample points; group k is last."""
    per_group: List[np.ndarray]

    def __post_init__(self):
        if len(self.per_group) < 2:
            raise InvalidInputError("a loss batch needs at least two groups")
        for i, r in enumerate(self.per_group):
            if np.ndim(r) != 2 or np.shape(r)[0] == 0:
                raise InvalidInputError(f"loss batch group {i + 1} must be a nonempty (n, k-1) array")

    @property
    def k(self) -> int:
        return len(self.per_group)

    @classmethod
    def from_model(
        cls,
        model: "RatioModel",
        dataset: GroupedDataset,
        minibatch: Optional[Sequence[np.ndarray]] = None,
    ) -> "LossBatch":
        """Evaluate the model on a minibatch, or on the full dataset."""
        groups = dataset.groups if minibatch is None else dataset.subset(
            validate_minibatch(minibatch, dataset.sizes)
        )
        return cls(per_group=[model.evaluate(X) for X in groups])


def _check_batch(obj: ConvexObjective, batch: LossBatch) -> None:
    if batch.k != obj.k:
        raise DimensionMismatchError(f"loss batch has {batch.k} groups, objective expects k={obj.k}")
    for i, r in enumerate(batch.per_group):
        if r.shape[1] != obj.width:
            raise DimensionMismatchError(
                f"group {i + 1} ratios have width {r.shape[1]}, expected k-1={obj.width}"
            )


def dre_loss(obj: ConvexObjective, batch: LossBatch) -> float:
    """
    Empirical DRE loss on model outputs.

    Args:
        obj: Convex objective
        batch: Per-group ratio outputs

    Returns:
        mean_k[<grad f(r), r> - f(r)] - sum_{i<k} mean_i[d_i f(r)]
    """
    _check_batch(obj, batch)
    pivot = batch.per_group[-1]
    loss = float(np.mean(np.sum(obj.gradient(pivot) * pivot, axis=1) - obj.value(pivot)))
    for i, r in enumerate(batch.per_group[:-1]):
        loss -= float(np.mean(obj.gradient(r)[:, i]))
    return loss


def dre_loss_and_gradient(
    obj: ConvexObjective,
    model: "RatioModel",
    dataset: GroupedDataset,
    minibatch: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[float, np.ndarray]:
    """
    Minibatch DRE loss and its exact gradient with respect to model parameters.

    The pivot term differentiates to H(r) r and group i's term to -H(r) e_i;
    both are pulled back through the model with one vector-Jacobian product
    per group.
    """
    if model.k != obj.k:
        raise DimensionMismatchError(f"model has k={model.k}, objective expects k={obj.k}")
    if minibatch is None:
        groups = list(dataset.groups)
    else:
        groups = dataset.subset(validate_minibatch(minibatch, dataset.sizes))

    loss = 0.0
    grad = np.zeros(model.n_params)
    last = obj.k - 1
    for i, X in enumerate(groups):
        r, state = model.forward(X)
        n = r.shape[0]
        if i == last:
            loss += float(np.mean(np.sum(obj.gradient(r) * r, axis=1) - obj.value(r)))
            upstream = obj.hessian_vector(r, r) / n
        else:
            loss -= float(np.mean(obj.gradient(r)[:, i]))
            e = np.zeros_like(r)
            e[:, i] = 1.0
            upstream = -obj.hessian_vector(r, e) / n
        grad += model.backward(state, upstream)
    return loss, grad


def dre_loss_gradient(
    obj: ConvexObjective,
    model: "RatioModel",
    dataset: GroupedDataset,
    minibatch: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """Gradient of the minibatch DRE loss with respect to model parameters."""
    return dre_loss_and_gradient(obj, model, dataset, minibatch)[1]


# =============================================================================
# Diagnostics
# =============================================================================

def kliep_normalization(model: "RatioModel", dataset: GroupedDataset) -> np.ndarray:
    """
    Mean of each estimated ratio over pivot samples.

    E_{p_k}[r_i] = 1 for the true ratios, so departures measure how far a
    fitted model is from a normalised density ratio.
    """
    return model.evaluate(dataset.pivot).mean(axis=0)


def power_sample_weights(r: np.ndarray, alpha: float) -> np.ndarray:
    """Implicit per-sample weights r^(alpha - 1) of the power objective."""
    if alpha <= 1.0:
        raise InvalidInputError(f"alpha must exceed 1, got {alpha}")
    return as_ratio_vectors(r) ** (alpha - 1.0)
