"""
Ratio Applications

Downstream uses of canonical density ratios: pairwise ratio recovery, the
pairwise-averaged MAE, (multiple) importance sampling, sampling-importance-
resampling and AUROC scoring.
"""

from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.stats import rankdata

from src.exceptions import DimensionMismatchError, InvalidInputError
from src.models.base import RatioModel
from src.schemas.reports import MaeReport, MisReport, SirReport
from src.services.link import extend_ratios
from src.utils.numerics import safe_log
from src.utils.rng import make_rng
from src.utils.validation import as_points

RatioSource = Union[RatioModel, Callable[[np.ndarray], np.ndarray]]
PointFn = Callable[[np.ndarray], np.ndarray]
TruthFn = Callable[[int, int, np.ndarray], np.ndarray]

MAE_CLIP = 50.0


class PairRatioQuery(BaseModel):
    """Request for p_i / p_j with 1-based indices."""

    model_config = ConfigDict(frozen=True)

    i: int = Field(ge=1)
    j: int = Field(ge=1)

    @model_validator(mode="after")
    def validate_distinct(self) -> "PairRatioQuery":
        if self.i == self.j:
            raise InvalidInputError(f"pair query needs i != j, got ({self.i}, {self.j})")
        return self


class MisWeights(BaseModel):
    """Mixture weights over proposals."""

    model_config = ConfigDict(frozen=True)

    omega: List[float]

    @field_validator("omega")
    @classmethod
    def validate_omega(cls, v: List[float]) -> List[float]:
        arr = np.asarray(v, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidInputError("MIS weights must be a nonempty list")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidInputError("MIS weights must be nonnegative")
        if abs(float(arr.sum()) - 1.0) > 1e-12:
            raise InvalidInputError(f"MIS weights must sum to 1, got {arr.sum()!r}")
        return [float(w) for w in arr]


class ResampleScheme(str, Enum):
    MULTINOMIAL = "multinomial"
    RESIDUAL = "residual"


def _ratios(source: RatioSource, X: np.ndarray) -> np.ndarray:
    if isinstance(source, RatioModel):
        return source.evaluate(X)
    return np.asarray(source(X), dtype=float)


# =============================================================================
# Pairwise ratios and MAE
# =============================================================================

def pairwise_ratio(
    model: RatioSource,
    x: np.ndarray,
    q: PairRatioQuery,
    k: Optional[int] = None,
):
    """
    Estimated p_i(x) / p_j(x) = r_i(x) / r_j(x) with r_k = 1.

    Args:
        model: RatioModel or function from (n, d) points to (n, k-1) ratios
        x: Point (d,) or points (n, d)
        q: Index pair
        k: Number of distributions when model is a plain function

    Returns:
        float for a single point, (n,) array otherwise
    """
    single = np.ndim(x) == 1
    X = as_points(x)
    r = extend_ratios(np.atleast_2d(_ratios(model, X)))
    k = r.shape[1] if k is None else k
    if r.shape[1] != k or q.i > k or q.j > k:
        raise DimensionMismatchError(f"pair ({q.i}, {q.j}) is out of range for k={r.shape[1]}")
    out = r[:, q.i - 1] / r[:, q.j - 1]
    return float(out[0]) if single else out


def pairwise_matrix(r: np.ndarray) -> np.ndarray:
    """All pairwise ratios R[n, i, j] = r_i / r_j from (n, k-1) canonical ratios."""
    full = extend_ratios(np.atleast_2d(r))
    return full[:, :, None] / full[:, None, :]


def mae_report(
    model: RatioSource,
    truth: TruthFn,
    eval_points: np.ndarray,
    clip_at: float = MAE_CLIP,
) -> MaeReport:
    """
    Pairwise-averaged mean absolute error, its clipped diagnostic and the
    same average on the log-ratio scale.

    MAE = 2 / (k (k-1)) * mean_x sum_{i<j} |truth(i, j, x) - r_i(x) / r_j(x)|

    log-MAE replaces each term by |log truth(i, j, x) - log(r_i(x) / r_j(x))|.

    Args:
        model: RatioModel or ratio function
        truth: truth(i, j, X) -> (n,) true p_i / p_j, 1-based indices
        eval_points: (n, d) evaluation points
        clip_at: Clip level of the diagnostic
    """
    X = as_points(eval_points)
    if X.shape[0] == 0:
        raise InvalidInputError("MAE needs at least one evaluation point")
    est = pairwise_matrix(_ratios(model, X))
    k = est.shape[1]
    total = np.zeros(X.shape[0])
    total_clipped = np.zeros(X.shape[0])
    total_log = np.zeros(X.shape[0])
    for i in range(1, k + 1):
        for j in range(i + 1, k + 1):
            true_ij = np.asarray(truth(i, j, X), dtype=float)
            est_ij = est[:, i - 1, j - 1]
            total += np.abs(true_ij - est_ij)
            total_clipped += np.abs(np.minimum(true_ij, clip_at) - np.minimum(est_ij, clip_at))
            total_log += np.abs(safe_log(true_ij) - safe_log(est_ij))
    scale = 2.0 / (k * (k - 1))
    return MaeReport(
        mae=float(scale * np.mean(total)),
        mae_clipped=float(scale * np.mean(total_clipped)),
        log_mae=float(scale * np.mean(total_log)),
        clip_at=clip_at,
        n_eval=int(X.shape[0]),
    )


def mae(model: RatioSource, truth: TruthFn, eval_points: np.ndarray) -> float:
    """Pairwise-averaged mean absolute error between true and estimated ratios."""
    return mae_report(model, truth, eval_points).mae


# =============================================================================
# Importance sampling
# =============================================================================

def ess_kish(weights: np.ndarray) -> float:
    """(sum w)^2 / sum w^2."""
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def ess_max(weights: np.ndarray) -> float:
    """sum w / max w."""
    w = np.asarray(weights, dtype=float)
    return float(w.sum() / w.max())


def _is_terms(ratio_fn: PointFn, phi: PointFn, samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = as_points(samples)
    if X.shape[0] == 0:
        raise InvalidInputError("importance sampling needs at least one sample")
    w = np.asarray(ratio_fn(X), dtype=float).ravel()
    values = np.asarray(phi(X), dtype=float).ravel()
    if w.shape != values.shape or w.shape[0] != X.shape[0]:
        raise DimensionMismatchError("ratio and phi must return one value per sample")
    return w, w * values


def is_estimate(ratio_fn: PointFn, phi: PointFn, samples: np.ndarray) -> float:
    """
    Importance-sampling estimate of E_q[phi] from proposal samples.

    Args:
        ratio_fn: q(x) / p(x) for the proposal p
        phi: Integrand
        samples: (n, d) draws from p
    """
    _, terms = _is_terms(ratio_fn, phi, samples)
    return float(np.mean(terms))


def mis_report(
    ratio_fns: Sequence[PointFn],
    weights: MisWeights,
    phi: PointFn,
    proposal_samples: Sequence[np.ndarray],
) -> MisReport:
    """Multiple importance sampling estimate with standard error and ESS."""
    if not (len(ratio_fns) == len(weights.omega) == len(proposal_samples)):
        raise DimensionMismatchError(
            f"{len(ratio_fns)} ratio functions, {len(weights.omega)} weights and "
            f"{len(proposal_samples)} sample sets must agree"
        )
    estimate = 0.0
    variance = 0.0
    per_proposal = []
    ess = []
    for omega, ratio_fn, samples in zip(weights.omega, ratio_fns, proposal_samples):
        w, terms = _is_terms(ratio_fn, phi, samples)
        part = float(np.mean(terms))
        per_proposal.append(part)
        estimate += omega * part
        if terms.size > 1:
            variance += omega ** 2 * float(np.var(terms, ddof=1)) / terms.size
        ess.append(ess_kish(w) if np.any(w > 0) else 0.0)
    return MisReport(
        estimate=estimate,
        standard_error=float(np.sqrt(variance)),
        per_proposal=per_proposal,
        weights=list(weights.omega),
        ess=ess,
    )


def mis_estimate(
    ratio_fns: Sequence[PointFn],
    weights: MisWeights,
    phi: PointFn,
    proposal_samples: Sequence[np.ndarray],
) -> float:
    """
    sum_i omega_i * mean over proposal i of (q/p_i)(x) phi(x).

    Args:
        ratio_fns: q/p_i for each proposal
        weights: Mixture weights omega
        phi: Integrand
        proposal_samples: Samples of each proposal
    """
    return mis_report(ratio_fns, weights, phi, proposal_samples).estimate


def mis_from_model(model: RatioModel, target: int, proposals: Sequence[int]) -> List[PointFn]:
    """
    Ratio functions q/p_i = r_target / r_i from one fitted model.

    Args:
        model: Fitted ratio model over k distributions
        target: 1-based index of the target distribution
        proposals: 1-based indices of the proposal distributions
    """
    k = model.k
    for idx in [target, *proposals]:
        if not 1 <= idx <= k:
            raise InvalidInputError(f"distribution index {idx} out of range 1..{k}")

    def make(i: int) -> PointFn:
        def ratio(X: np.ndarray) -> np.ndarray:
            full = extend_ratios(model.evaluate(as_points(X)))
            return full[:, target - 1] / full[:, i - 1]
        return ratio

    return [make(i) for i in proposals]


# =============================================================================
# Resampling
# =============================================================================

def _normalized_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0:
        raise InvalidInputError("weights must be nonempty")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInputError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise InvalidInputError("at least one weight must be positive")
    return w / total


def sir_resample(
    weights: Sequence[float],
    m: int,
    seed: int = 0,
    scheme: str = ResampleScheme.MULTINOMIAL,
) -> np.ndarray:
    """
    Draw m indices with probability proportional to weights.

    Args:
        weights: Nonnegative importance weights, at least one positive
        m: Number of draws
        seed: Seed of the "resample" stream
        scheme: multinomial or residual

    Returns:
        (m,) int array of indices
    """
    p = _normalized_weights(weights)
    if m < 0:
        raise InvalidInputError(f"m must be nonnegative, got {m}")
    scheme = ResampleScheme(scheme)
    rng = make_rng(seed, "resample")
    if scheme == ResampleScheme.MULTINOMIAL:
        return rng.choice(p.size, size=int(m), p=p)

    expected = p * m
    copies = np.floor(expected).astype(int)
    residual = expected - copies
    left = int(m) - int(copies.sum())
    if left > 0:
        copies += rng.multinomial(left, residual / residual.sum())
    return rng.permutation(np.repeat(np.arange(p.size), copies))


def sir_report(weights: Sequence[float], m: int, seed: int = 0, scheme: str = "multinomial") -> SirReport:
    """Resampled indices plus effective-sample-size diagnostics."""
    w = np.asarray(weights, dtype=float)
    indices = sir_resample(w, m, seed, scheme)
    report = SirReport(
        indices=indices.tolist(),
        scheme=ResampleScheme(scheme).value,
        ess_max=ess_max(w),
        ess_kish=ess_kish(w),
    )
    logger.info(f"SIR drew {m} indices; ESS (sum/max) {report.ess_max:.1f}")
    return report


# =============================================================================
# AUROC
# =============================================================================

def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """
    Area under the ROC curve as the normalised Mann-Whitney U statistic,
    P(score+ > score-) + P(tie) / 2, with average ranks for ties.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise DimensionMismatchError(f"{s.size} scores for {y.size} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise InvalidInputError("labels must be 0 or 1")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise InvalidInputError("AUROC needs both positive and negative labels")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("scores must be finite")
    ranks = rankdata(s, method="average")
    u = float(ranks[y == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)
