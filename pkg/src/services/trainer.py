"""
Training Service

Minibatch first-order training of a RatioModel under either loss family,
plus finite-difference gradient checks.
"""

import math
import time
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from src.exceptions import InvalidInputError, NumericalAbortError
from src.models.base import RatioModel
from src.models.loglinear import LogLinearModel
from src.models.mlp import MlpModel
from src.schemas.config import OptimizerConfig
from src.schemas.core import GroupedDataset, Prior
from src.schemas.reports import GradCheckReport, GradCheckResult, TrainReport
from src.services.link import estimate_prior
from src.services.objectives import (
    ConvexObjective,
    PowerObjective,
    dre_loss_and_gradient,
    kliep_normalization,
    make_objective,
    power_sample_weights,
)
from src.services.optimizers import make_optimizer
from src.services.scoring import (
    DEFAULT_LOSS_CAP,
    RuleKind,
    ScoringRule,
    cpe_dre_loss_and_gradient,
    make_rule,
)
from src.utils.numerics import guards
from src.utils.rng import make_rng
from src.utils.validation import validate_minibatch

LossSpec = Union[ConvexObjective, ScoringRule]
GradientFn = Callable[[RatioModel, Sequence[np.ndarray]], np.ndarray]


def loss_and_gradient(
    loss_spec: LossSpec,
    model: RatioModel,
    dataset: GroupedDataset,
    minibatch: Optional[Sequence[np.ndarray]] = None,
    prior: Optional[Prior] = None,
) -> Tuple[float, np.ndarray]:
    """Loss and parameter gradient for either loss family."""
    if isinstance(loss_spec, ScoringRule):
        return cpe_dre_loss_and_gradient(loss_spec, model, dataset, prior, minibatch)
    return dre_loss_and_gradient(loss_spec, model, dataset, minibatch)


def make_loss(
    name: str,
    k: int,
    alpha: Optional[float] = None,
    prior: Optional[Prior] = None,
    H: Optional[np.ndarray] = None,
    q: Optional[np.ndarray] = None,
    cap: float = DEFAULT_LOSS_CAP,
) -> LossSpec:
    """Scoring rule or convex objective by name; alpha goes to whichever takes one."""
    if str(name).lower() in {kind.value for kind in RuleKind}:
        return make_rule(name, alpha=alpha, cap=cap)
    return make_objective(name, k, alpha=alpha, H=H, q=q, prior=prior)


def describe_loss(loss_spec: LossSpec) -> Dict:
    return loss_spec.params()


class MinibatchSampler:
    """
    Per-group minibatches for one epoch at a time.

    An epoch is ceil(max_i n_i / batch) steps. A group that fits in one pass
    is drawn from a single fresh permutation, so no index repeats within the
    epoch and its last batch may be short. Smaller groups keep the batch size
    and cycle through fresh permutations until the epoch ends.
    """

    def __init__(self, sizes: Sequence[int], batch_size: int, rng: np.random.Generator):
        self.sizes = [int(n) for n in sizes]
        self.batch_size = int(batch_size)
        self.rng = rng

    @property
    def steps_per_epoch(self) -> int:
        return max(1, math.ceil(max(self.sizes) / self.batch_size))

    def _group_batches(self, n: int) -> List[np.ndarray]:
        steps = self.steps_per_epoch
        b = min(self.batch_size, n)
        if n > (steps - 1) * b:
            stream = self.rng.permutation(n)
        else:
            reps = math.ceil(steps * b / n)
            stream = np.concatenate([self.rng.permutation(n) for _ in range(reps)])
        return [stream[s * b:(s + 1) * b] for s in range(steps)]

    def epoch(self) -> Iterator[List[np.ndarray]]:
        """Yield the minibatches of one epoch, one index array per group."""
        per_group = [self._group_batches(n) for n in self.sizes]
        for s in range(self.steps_per_epoch):
            yield [batches[s] for batches in per_group]


def _check_loss(step: int, loss: float, limit: float) -> None:
    if not np.isfinite(loss):
        raise NumericalAbortError(step, loss, "non-finite loss")
    if abs(loss) > limit:
        raise NumericalAbortError(step, loss, f"|loss| exceeds {limit:g}")


def train(
    loss_spec: LossSpec,
    model: RatioModel,
    dataset: GroupedDataset,
    cfg: OptimizerConfig,
    on_epoch: Optional[Callable[[int, float], None]] = None,
    validation: Optional[GroupedDataset] = None,
) -> Tuple[RatioModel, TrainReport]:
    """
    Fit a ratio model by minimising a DRE loss.

    With a validation sample the returned model is the one with the lowest
    validation loss seen after any epoch (or the initial one), and
    cfg.patience stops training once that many epochs pass without
    improvement.

    Args:
        loss_spec: Convex objective (Bregman route) or scoring rule (CPE route)
        model: Initial model; it is copied, never modified
        dataset: Training samples, group k is the pivot
        cfg: Optimizer configuration
        on_epoch: Called with (epoch, full-dataset loss) after every epoch
        validation: Held-out samples with the same groups as dataset

    Returns:
        (trained model, TrainReport)

    Raises:
        NumericalAbortError: non-finite or divergent loss, gradient or parameters
    """
    if model.k != dataset.k or model.dim != dataset.dim:
        raise InvalidInputError(
            f"model (dim={model.dim}, k={model.k}) does not fit dataset "
            f"(dim={dataset.dim}, k={dataset.k})"
        )
    if validation is not None and (validation.k != dataset.k or validation.dim != dataset.dim):
        raise InvalidInputError("validation samples must have the training groups and dimension")
    if cfg.patience is not None and validation is None:
        raise InvalidInputError("early stopping (patience) needs a validation sample")

    model = model.copy()
    prior = estimate_prior(dataset) if isinstance(loss_spec, ScoringRule) else None
    optimizer = make_optimizer(cfg)
    guard_start = guards.snapshot()
    start = time.perf_counter()

    def validation_loss() -> float:
        loss, _ = loss_and_gradient(loss_spec, model, validation, None, prior)
        return float(loss) if np.isfinite(loss) else float("inf")

    initial_loss, _ = loss_and_gradient(loss_spec, model, dataset, None, prior)
    _check_loss(0, initial_loss, cfg.divergence_limit)

    sampler = MinibatchSampler(dataset.sizes, cfg.minibatch_size, make_rng(cfg.seed, "shuffle"))
    steps_per_epoch = 1 if cfg.full_batch else sampler.steps_per_epoch
    history: List[float] = []
    val_history: List[float] = []
    best_val = validation_loss() if validation is not None else None
    best_params = model.get_params()
    best_epoch = 0
    stopped_early = False
    step = 0
    epoch_loss = initial_loss

    logger.info(
        f"Training {model!r} with {loss_spec!r}: {cfg.epochs} epochs x {steps_per_epoch} steps"
    )
    for epoch in range(1, cfg.epochs + 1):
        batches = [None] if cfg.full_batch else sampler.epoch()
        for minibatch in batches:
            loss, grad = loss_and_gradient(loss_spec, model, dataset, minibatch, prior)
            _check_loss(step, loss, cfg.divergence_limit)
            if not np.all(np.isfinite(grad)):
                raise NumericalAbortError(step, loss, "non-finite gradient")
            theta = optimizer.step(model.get_params(), grad)
            step += 1
            if not np.all(np.isfinite(theta)):
                raise NumericalAbortError(step, loss, "non-finite parameters")
            model.set_params(theta)

        epoch_loss, _ = loss_and_gradient(loss_spec, model, dataset, None, prior)
        _check_loss(step, epoch_loss, cfg.divergence_limit)
        history.append(epoch_loss)
        logger.debug(f"epoch {epoch}/{cfg.epochs}: loss={epoch_loss:.6g}")
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)

        if validation is not None:
            val = validation_loss()
            val_history.append(val)
            if val < best_val:
                best_val, best_params, best_epoch = val, model.get_params(), epoch
            elif cfg.patience is not None and epoch - best_epoch >= cfg.patience:
                stopped_early = True
                logger.info(f"Early stop after epoch {epoch}; best validation loss at epoch {best_epoch}")
                break

    if validation is not None and best_epoch < len(history):
        model.set_params(best_params)
        epoch_loss = initial_loss if best_epoch == 0 else history[best_epoch - 1]

    diagnostics = training_diagnostics(loss_spec, model, dataset)
    diagnostics["guards"] = guards.since(guard_start)
    report = TrainReport(
        loss_history=history,
        final_loss=epoch_loss,
        initial_loss=initial_loss,
        steps=step,
        epochs=len(history),
        loss=describe_loss(loss_spec),
        optimizer=cfg.model_dump(mode="json"),
        diagnostics=diagnostics,
        validation_history=val_history,
        best_epoch=best_epoch if validation is not None else None,
        stopped_early=stopped_early,
        wall_time=time.perf_counter() - start,
    )
    logger.info(f"Training finished: {step} steps, final loss {epoch_loss:.6g}")
    return model, report


def training_diagnostics(loss_spec: LossSpec, model: RatioModel, dataset: GroupedDataset) -> Dict:
    """Objective-specific diagnostics of a fitted model."""
    out: Dict = {}
    kind = getattr(loss_spec, "kind", None)
    if kind in ("kliep", "power"):
        out["kliep_normalization"] = kliep_normalization(model, dataset).tolist()
    if isinstance(loss_spec, PowerObjective):
        w = power_sample_weights(model.evaluate(dataset.pivot), loss_spec.alpha)
        out["power_weights"] = {
            "min": float(w.min()),
            "median": float(np.median(w)),
            "max": float(w.max()),
        }
    return out


# =============================================================================
# Gradient checks
# =============================================================================

def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """
    |a - n| / max(|a|, |n|, floor), elementwise.

    The floor is 1e-4 * max(1, max|a|).
    """
    scale = max(1.0, float(np.max(np.abs(analytic)))) if np.size(analytic) else 1.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4 * scale)
    return np.abs(analytic - numeric) / denom


def gradient_check(
    loss_spec: LossSpec,
    model: RatioModel,
    dataset: GroupedDataset,
    epsilon: float = 1e-5,
    minibatch: Optional[Sequence[np.ndarray]] = None,
    seed: int = 0,
    batch_size: int = 10,
    gradient_fn: Optional[GradientFn] = None,
) -> float:
    """
    Compare the analytic gradient with central finite differences.

    Args:
        loss_spec: Convex objective or scoring rule
        model: Model at the parameters to check (not modified)
        dataset: Samples
        epsilon: Finite-difference step in (0, 1e-2]
        minibatch: Fixed index sets; drawn from the "gradcheck" stream when omitted
        seed: Seed for the minibatch draw
        batch_size: Samples per group when drawing a minibatch
        gradient_fn: Replacement analytic gradient (model, minibatch) -> vector

    Returns:
        Maximum relative error over parameters
    """
    if not 0.0 < epsilon <= 1e-2:
        raise InvalidInputError(f"epsilon must lie in (0, 1e-2], got {epsilon}")
    if minibatch is None:
        rng = make_rng(seed, "gradcheck")
        minibatch = [
            rng.choice(n, size=min(batch_size, n), replace=False) for n in dataset.sizes
        ]
    minibatch = validate_minibatch(minibatch, dataset.sizes)
    prior = estimate_prior(dataset) if isinstance(loss_spec, ScoringRule) else None

    work = model.copy()
    if gradient_fn is None:
        _, analytic = loss_and_gradient(loss_spec, work, dataset, minibatch, prior)
    else:
        analytic = np.asarray(gradient_fn(work, minibatch), dtype=float)

    theta = work.get_params()
    numeric = np.zeros_like(theta)
    for p in range(theta.size):
        bumped = theta.copy()
        bumped[p] = theta[p] + epsilon
        work.set_params(bumped)
        plus, _ = loss_and_gradient(loss_spec, work, dataset, minibatch, prior)
        bumped[p] = theta[p] - epsilon
        work.set_params(bumped)
        minus, _ = loss_and_gradient(loss_spec, work, dataset, minibatch, prior)
        numeric[p] = (plus - minus) / (2.0 * epsilon)

    err = float(np.max(relative_error(analytic, numeric))) if theta.size else 0.0
    logger.debug(f"gradient_check {loss_spec!r} on {model!r}: max rel error {err:.3g}")
    return err


SUITE_OBJECTIVES = ("multilr", "lsif", "kliep", "power", "quadratic", "logsumexp")
SUITE_RULES = ("log", "brier", "pseudospherical")
SUITE_MODELS = ("loglinear", "mlp")


def _suite_loss(name: str, k: int, rng: np.random.Generator) -> LossSpec:
    if name in SUITE_RULES:
        alpha = float(rng.uniform(1.2, 3.0)) if name == "pseudospherical" else None
        return make_rule(name, alpha=alpha)
    if name == "power":
        return make_objective(name, k, alpha=float(rng.uniform(1.2, 3.0)))
    if name == "logsumexp":
        return make_objective(name, k, alpha=float(rng.uniform(0.5, 5.0)))
    if name == "multilr" and rng.random() < 0.5:
        return make_objective(name, k, prior=Prior.from_counts(rng.uniform(0.5, 2.0, size=k)))
    return make_objective(name, k)


def _suite_model(kind: str, dim: int, k: int, rng: np.random.Generator) -> RatioModel:
    if kind == "mlp":
        model: RatioModel = MlpModel(dim, k, hidden=(4,))
        model.initialize(rng)
    else:
        model = LogLinearModel(dim, k)
    theta = model.get_params()
    model.set_params(theta + 0.3 * rng.standard_normal(theta.size))
    return model


def run_gradient_suite(
    trials: int = 100,
    seed: int = 0,
    tolerance: float = 1e-4,
    epsilon: float = 1e-5,
) -> GradCheckReport:
    """
    Gradient checks for every objective and rule with both model families
    over random configurations.

    Each trial draws k in {2, 3, 4}, d in {1, 2, 3}, ten Gaussian samples per
    group and random model parameters.

    Returns:
        GradCheckReport with the worst relative error per (loss, model)
    """
    rng = make_rng(seed, "gradcheck", "suite")
    worst: Dict[Tuple[str, str], float] = {}
    for trial in range(trials):
        k = int(rng.integers(2, 5))
        dim = int(rng.integers(1, 4))
        dataset = GroupedDataset.from_arrays(
            [rng.normal(loc=0.5 * i, size=(10, dim)) for i in range(k)]
        )
        for name in SUITE_OBJECTIVES + SUITE_RULES:
            loss_spec = _suite_loss(name, k, rng)
            for kind in SUITE_MODELS:
                model = _suite_model(kind, dim, k, rng)
                err = gradient_check(loss_spec, model, dataset, epsilon=epsilon, seed=trial)
                key = (name, kind)
                worst[key] = max(worst.get(key, 0.0), err)

    results = [
        GradCheckResult(loss=name, model=kind, max_rel_error=err, passed=err <= tolerance)
        for (name, kind), err in worst.items()
    ]
    report = GradCheckReport(
        trials=trials,
        tolerance=tolerance,
        results=results,
        passed=all(r.passed for r in results),
    )
    logger.info(f"Gradient suite: {len(results)} combinations, passed={report.passed}")
    return report
