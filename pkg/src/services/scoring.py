"""
Scoring-Rule Losses

Strictly proper scoring rules composed with the inverse link, giving the
class-probability-estimation route to density ratios:

    sum_i pi_i * mean_{x in group i} l(i, link_inverse(r(x), pi))

Probabilities are handled as logarithms throughout so that extreme ratios
never produce log(0).
"""

from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.special import logsumexp

from src.exceptions import DimensionMismatchError, InvalidInputError
from src.schemas.core import GroupedDataset, Prior
from src.services.link import estimate_prior
from src.utils.numerics import guards
from src.utils.validation import as_probability_vectors, validate_minibatch

if TYPE_CHECKING:
    from src.models.base import RatioModel

DEFAULT_LOSS_CAP = 1e6
DEFAULT_PS_ALPHA = 1.8


class RuleKind(str, Enum):
    """Supported proper scoring rules."""
    LOG = "log"
    BRIER = "brier"
    PSEUDOSPHERICAL = "pseudospherical"

    def __str__(self) -> str:
        return self.value


class ScoringRule:
    """
    A proper scoring rule l(i, q) over the k-simplex.

    Attributes:
        kind: log, brier or pseudospherical
        alpha: Pseudo-spherical exponent (> 1)
        cap: Upper bound applied to infinite losses at zero probabilities
    """

    def __init__(
        self,
        kind: str,
        alpha: Optional[float] = None,
        cap: float = DEFAULT_LOSS_CAP,
    ):
        try:
            self.kind = RuleKind(str(kind).lower())
        except ValueError:
            names = ", ".join(item.value for item in RuleKind)
            raise InvalidInputError(f"unknown scoring rule '{kind}', expected one of: {names}")

        if self.kind == RuleKind.PSEUDOSPHERICAL:
            alpha = DEFAULT_PS_ALPHA if alpha is None else float(alpha)
            if not np.isfinite(alpha) or alpha <= 1.0:
                raise InvalidInputError(f"pseudo-spherical rule needs alpha > 1, got {alpha}")
        else:
            alpha = None
        self.alpha = alpha
        if cap <= 0:
            raise InvalidInputError("loss cap must be positive")
        self.cap = float(cap)

        logger.info(f"ScoringRule initialized: {self!r}")

    def __repr__(self) -> str:
        if self.alpha is None:
            return f"ScoringRule(kind={self.kind.value!r})"
        return f"ScoringRule(kind={self.kind.value!r}, alpha={self.alpha!r})"

    def params(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"rule": self.kind.value}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out

    @property
    def singular_weight(self) -> float:
        """Coefficient c of the -c log q_i term of the loss."""
        if self.kind == RuleKind.LOG:
            return 1.0
        if self.kind == RuleKind.PSEUDOSPHERICAL:
            return self.alpha - 1.0
        return 0.0

    def loss_table(self, log_q: np.ndarray) -> np.ndarray:
        """
        Losses for every label.

        Args:
            log_q: (n, k) log-probabilities (entries may be -inf)

        Returns:
            (n, k) array with entry [n, i] = l(i, q_n), before capping
        """
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.kind == RuleKind.LOG:
                return -log_q
            if self.kind == RuleKind.BRIER:
                q = np.exp(log_q)
                return -2.0 * q + np.sum(q * q, axis=1, keepdims=True) + 1.0
            a = self.alpha
            log_norm = logsumexp(a * log_q, axis=1, keepdims=True)
            return -(a - 1.0) * log_q + ((a - 1.0) / a) * log_norm

    def smooth_gradient(self, log_q: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """
        Gradient in q of the loss with its -c log q_i part removed.

        Returns:
            (n, k) array
        """
        n, k = log_q.shape
        if self.kind == RuleKind.LOG:
            return np.zeros((n, k))
        if self.kind == RuleKind.BRIER:
            h = 2.0 * np.exp(log_q)
            h[np.arange(n), labels] -= 2.0
            return h
        a = self.alpha
        log_norm = logsumexp(a * log_q, axis=1, keepdims=True)
        return (a - 1.0) * np.exp((a - 1.0) * log_q - log_norm)

    def _cap(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        over = ~(values <= self.cap)
        if np.any(over):
            guards.record("score_cap", int(np.count_nonzero(over)))
            values = np.where(over, self.cap, values)
        return values, over


def make_rule(kind: str, alpha: Optional[float] = None, cap: float = DEFAULT_LOSS_CAP) -> ScoringRule:
    """Build a scoring rule by name."""
    return ScoringRule(kind, alpha=alpha, cap=cap)


def pointwise_loss(rule: ScoringRule, label: int, eta_hat: np.ndarray) -> float:
    """
    Loss of predicting eta_hat when the true class is label.

    Args:
        rule: Scoring rule
        label: Class index in 1..k
        eta_hat: Probability vector of length k

    Returns:
        Loss value; infinite values are replaced by rule.cap
    """
    q = as_probability_vectors(eta_hat)
    k = q.shape[1]
    if not 1 <= int(label) <= k:
        raise InvalidInputError(f"label must be in 1..{k}, got {label}")
    with np.errstate(divide="ignore"):
        log_q = np.log(q)
    value = rule.loss_table(log_q)[:, int(label) - 1]
    value, _ = rule._cap(value)
    return float(value[0])


def expected_loss(rule: ScoringRule, eta: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Conditional risk L(eta, q) = sum_i eta_i l(i, q), row by row."""
    eta = as_probability_vectors(eta)
    q = as_probability_vectors(q, k=eta.shape[1])
    with np.errstate(divide="ignore"):
        table = rule.loss_table(np.log(q))
    table, _ = rule._cap(table)
    return np.sum(eta * table, axis=1)


def _log_eta_from_ratios(log_r: np.ndarray, log_pi: np.ndarray) -> np.ndarray:
    log_w = log_pi[None, :] + np.concatenate([log_r, np.zeros((log_r.shape[0], 1))], axis=1)
    return log_w - logsumexp(log_w, axis=1, keepdims=True)


def ratio_gradient(
    rule: ScoringRule,
    log_r: np.ndarray,
    log_eta: np.ndarray,
    label: int,
) -> np.ndarray:
    """
    Gradient of l(label, link_inverse(r)) with respect to r (first k-1 entries).

    With S = sum_j pi_j r_j, d eta_j / d r_m = (pi_m / S)(delta_jm - eta_j), and
    pi_m / S = eta_m / r_m.
    """
    n = log_r.shape[0]
    labels = np.full(n, label, dtype=int)
    scale = np.exp(log_eta[:, :-1] - log_r)
    h = rule.smooth_gradient(log_eta, labels)
    smooth = scale * (h[:, :-1] - np.sum(h * np.exp(log_eta), axis=1, keepdims=True))
    c = rule.singular_weight
    grad = smooth + c * scale
    if c and label < log_r.shape[1]:
        grad[:, label] -= c * np.exp(-log_r[:, label])
    return grad


def cpe_dre_loss_and_gradient(
    rule: ScoringRule,
    model: "RatioModel",
    dataset: GroupedDataset,
    prior: Optional[Prior] = None,
    minibatch: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[float, np.ndarray]:
    """
    Prior-weighted scoring-rule loss and its parameter gradient.

    Args:
        rule: Scoring rule
        model: Ratio model
        dataset: Grouped samples
        prior: Class prior; estimated from the full dataset's group sizes when omitted
        minibatch: One index set per group; the full dataset when omitted

    Returns:
        (loss, gradient)
    """
    if prior is None:
        prior = estimate_prior(dataset)
    if prior.k != dataset.k or model.k != dataset.k:
        raise DimensionMismatchError(
            f"prior k={prior.k}, model k={model.k} and dataset k={dataset.k} must agree"
        )
    if minibatch is None:
        groups = list(dataset.groups)
    else:
        groups = dataset.subset(validate_minibatch(minibatch, dataset.sizes))

    pi = prior.array
    log_pi = np.log(pi)
    loss = 0.0
    grad = np.zeros(model.n_params)
    for i, X in enumerate(groups):
        r, state = model.forward(X)
        log_r = np.log(r)
        log_eta = _log_eta_from_ratios(log_r, log_pi)
        values, capped = rule._cap(rule.loss_table(log_eta)[:, i])
        n = r.shape[0]
        loss += pi[i] * float(np.mean(values))

        dl_dr = ratio_gradient(rule, log_r, log_eta, i)
        dl_dr[capped] = 0.0
        grad += model.backward(state, dl_dr * (pi[i] / n))
    return loss, grad


def cpe_dre_loss(
    rule: ScoringRule,
    model: "RatioModel",
    dataset: GroupedDataset,
    prior: Optional[Prior] = None,
    minibatch: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """Prior-weighted mean scoring-rule loss of the model's implied class probabilities."""
    return cpe_dre_loss_and_gradient(rule, model, dataset, prior, minibatch)[0]


def cpe_dre_loss_gradient(
    rule: ScoringRule,
    model: "RatioModel",
    dataset: GroupedDataset,
    prior: Optional[Prior] = None,
    minibatch: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """Parameter gradient of cpe_dre_loss."""
    return cpe_dre_loss_and_gradient(rule, model, dataset, prior, minibatch)[1]
