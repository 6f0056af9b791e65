"""
Synthetic Benchmarks

Unit-covariance Gaussian families with closed-form ratios (log-scale MAE benchmark)
and a one-dimensional mixture setup for out-of-distribution scoring (AUROC
benchmark).
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.stats import norm

from src.exceptions import InvalidInputError, NumericalAbortError
from src.models import RatioModel, init_model
from src.schemas.config import FeatureKind, GaussianSpec, ModelKind, ModelSpec, OptimizerConfig
from src.schemas.core import GroupedDataset
from src.schemas.reports import AurocReport, BenchmarkCell, GaussianBenchmarkReport, OodReport
from src.services.applications import auroc, mae_report
from src.services.trainer import make_loss, train
from src.utils.rng import make_rng
from src.utils.validation import as_points
from src.workers.jobs import run_jobs

RANDOM_INIT = "random_init"
ORACLE = "oracle"
GAUSSIAN_METHODS = (
    RANDOM_INIT,
    "multilr",
    "kliep",
    "lsif",
    "power",
    "quadratic",
    "logsumexp",
    "brier",
    "pseudospherical",
)
OOD_COMPONENTS = (-3.0, 0.0, 3.0)
# full batch; training stops at the best validation epoch
GAUSSIAN_OPTIMIZER = OptimizerConfig(step_size=1e-2, epochs=1000, full_batch=True, patience=50)


# =============================================================================
# Gaussian family
# =============================================================================

def default_means(dim: int, k: int = 5, fix_mean5: bool = False) -> np.ndarray:
    """
    The five-Gaussian mean family.

    mu_1 = e_1, mu_2 = -e_1, mu_3 = e_2, mu_4 = -e_2 and mu_5 = e_1, a repeat
    of mu_1 kept as published. fix_mean5 substitutes e_3 for mu_5.

    Returns:
        (5, dim) array
    """
    if k != 5:
        raise InvalidInputError(f"only the k=5 family is predefined, got k={k}; pass means explicitly")
    if dim < 2:
        raise InvalidInputError(f"the default means need dim >= 2, got {dim}")
    if fix_mean5 and dim < 3:
        raise InvalidInputError("fix_mean5 needs dim >= 3")
    eye = np.eye(dim)
    fifth = eye[2] if fix_mean5 else eye[0]
    return np.vstack([eye[0], -eye[0], eye[1], -eye[1], fifth])


def true_gaussian_ratio(mu_i: np.ndarray, mu_j: np.ndarray, x: np.ndarray):
    """
    N(x; mu_i, I) / N(x; mu_j, I) = exp(x.(mu_i - mu_j) - (|mu_i|^2 - |mu_j|^2) / 2).

    Returns:
        float for one point, (n,) array for a batch
    """
    mu_i = np.asarray(mu_i, dtype=float)
    mu_j = np.asarray(mu_j, dtype=float)
    if mu_i.shape != mu_j.shape:
        raise InvalidInputError("means must have the same dimension")
    single = np.ndim(x) == 1
    X = as_points(x, dim=mu_i.size)
    out = np.exp(X @ (mu_i - mu_j) - 0.5 * (mu_i @ mu_i - mu_j @ mu_j))
    return float(out[0]) if single else out


class GaussianRatioOracle:
    """Exact canonical ratios of a unit-covariance Gaussian family."""

    def __init__(self, means: np.ndarray):
        self.means = np.asarray(means, dtype=float)
        if self.means.ndim != 2 or self.means.shape[0] < 2:
            raise InvalidInputError("need a (k, d) array of means with k >= 2")

    @property
    def k(self) -> int:
        return int(self.means.shape[0])

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """(n, d) points -> (n, k-1) ratios p_i / p_k; one point gives (k-1,)."""
        single = np.ndim(X) == 1
        pts = as_points(X, dim=self.means.shape[1])
        out = np.column_stack([true_gaussian_ratio(mu, self.means[-1], pts) for mu in self.means[:-1]])
        return out[0] if single else out

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.evaluate(X)

    def truth(self, i: int, j: int, X: np.ndarray) -> np.ndarray:
        """p_i / p_j with 1-based indices."""
        return true_gaussian_ratio(self.means[i - 1], self.means[j - 1], as_points(X))


def sample_gaussian_groups(means: np.ndarray, n: int, rng: np.random.Generator) -> GroupedDataset:
    """n unit-covariance samples around each mean."""
    means = np.asarray(means, dtype=float)
    return GroupedDataset.from_arrays(
        [mu[None, :] + rng.standard_normal((n, means.shape[1])) for mu in means]
    )


def _gaussian_job(job: Dict[str, Any]) -> Dict[str, Any]:
    means = np.asarray(job["means"], dtype=float)
    seed = int(job["seed"])
    train_set = sample_gaussian_groups(means, job["n_train"], make_rng(seed, "sampling"))
    eval_points = sample_gaussian_groups(means, job["n_eval"], make_rng(seed, "eval")).pooled()
    oracle = GaussianRatioOracle(means)

    method = job["method"]
    if method == ORACLE:
        ratio_source: Any = oracle
    else:
        model_spec = ModelSpec(**job["model_spec"])
        model = init_model(model_spec, seed, train_set)
        if method != RANDOM_INIT:
            loss_spec = make_loss(method, means.shape[0], alpha=job.get("alpha"))
            cfg = OptimizerConfig(**{**job["optimizer"], "seed": seed})
            validation = sample_gaussian_groups(means, job["n_eval"], make_rng(seed, "validation"))
            try:
                model, _ = train(loss_spec, model, train_set, cfg, validation=validation)
            except NumericalAbortError as e:
                logger.warning(f"{method} dim={means.shape[1]} seed={seed}: {e}")
                return {"error": str(e)}
        ratio_source = model
    report = mae_report(ratio_source, oracle.truth, eval_points)
    logger.info(f"{method} dim={means.shape[1]} seed={seed}: log-MAE {report.log_mae:.4f}, MAE {report.mae:.4f}")
    return {"log_mae": report.log_mae, "mae": report.mae, "mae_clipped": report.mae_clipped}


def run_gaussian_benchmark(
    dims: Sequence[int] = (2, 5, 10),
    methods: Sequence[str] = GAUSSIAN_METHODS,
    seeds: Sequence[int] = (0, 1, 2),
    n_per_group: int = 2000,
    n_eval: int = 1000,
    model: Optional[Dict[str, Any]] = None,
    optimizer: Optional[OptimizerConfig] = None,
    fix_mean5: bool = False,
    alpha: Optional[float] = None,
    means: Optional[np.ndarray] = None,
    n_jobs: int = 1,
) -> GaussianBenchmarkReport:
    """
    Log-scale MAE of each method on the Gaussian family, mean and std over seeds.

    A method that aborts on a seed records the error in its cell; the other
    cells still come out.

    Args:
        dims: Data dimensions
        methods: random_init, oracle, objective names or rule names
        seeds: One fresh training / evaluation sample per seed
        n_per_group: Training samples per group
        n_eval: Held-out samples per group (pooled for evaluation)
        model: ModelSpec fields other than dim and k (loglinear identity by default)
        optimizer: Optimizer configuration (GAUSSIAN_OPTIMIZER by default); its seed is replaced per job
        fix_mean5: Use e_3 as the fifth mean
        alpha: Parameter for power / logsumexp / pseudospherical methods
        means: Explicit (k, d) means; overrides dims and the default family
        n_jobs: Worker processes

    Returns:
        GaussianBenchmarkReport
    """
    model = dict(model or {"kind": ModelKind.LOGLINEAR.value, "features": FeatureKind.IDENTITY.value})
    optimizer = optimizer or GAUSSIAN_OPTIMIZER
    families = []
    if means is not None:
        means = np.asarray(means, dtype=float)
        families.append((means.shape[1], means))
    else:
        families = [(d, default_means(d, fix_mean5=fix_mean5)) for d in dims]

    jobs = []
    for dim, mu in families:
        spec = GaussianSpec(dim=dim, means=mu.tolist(), n_per_group=n_per_group, n_eval=n_eval)
        for method in methods:
            for seed in seeds:
                jobs.append({
                    "means": spec.means,
                    "method": method,
                    "seed": int(seed),
                    "n_train": spec.n_per_group,
                    "n_eval": spec.n_eval,
                    "alpha": alpha,
                    "model_spec": {**model, "dim": dim, "k": spec.k},
                    "optimizer": optimizer.model_dump(),
                })
    results = run_jobs(_gaussian_job, jobs, n_jobs)

    cells = []
    pos = 0
    for dim, _ in families:
        for method in methods:
            outcomes = results[pos:pos + len(seeds)]
            pos += len(seeds)
            done = [o for o in outcomes if "error" not in o]
            values = [o["log_mae"] for o in done]
            cells.append(BenchmarkCell(
                method=method,
                dim=dim,
                values=values,
                mean=float(np.mean(values)) if values else float("nan"),
                std=float(np.std(values)) if values else float("nan"),
                ratio_mean=float(np.mean([o["mae"] for o in done])) if done else float("nan"),
                clipped_mean=float(np.mean([o["mae_clipped"] for o in done])) if done else float("nan"),
                errors=[o["error"] for o in outcomes if "error" in o],
            ))

    return GaussianBenchmarkReport(
        means_family="explicit" if means is not None else ("fix_mean5" if fix_mean5 else "verbatim"),
        seeds=[int(s) for s in seeds],
        n_per_group=n_per_group,
        n_eval=n_eval,
        config={
            "dims": [d for d, _ in families],
            "methods": list(methods),
            "model": model,
            "optimizer": optimizer.model_dump(mode="json"),
            "alpha": alpha,
        },
        cells=cells,
    )


def gaussian_table(report: GaussianBenchmarkReport) -> Tuple[List[str], List[List[str]]]:
    """Method x dimension table of "mean ± std" strings."""
    dims = report.config["dims"]
    header = ["method"] + [f"d={d}" for d in dims]
    by_key = {(c.method, c.dim): c for c in report.cells}
    rows = []
    for method in report.config["methods"]:
        rows.append([method] + [by_key[(method, d)].formatted() for d in dims])
    return header, rows


# =============================================================================
# Out-of-distribution benchmark
# =============================================================================

def sample_ood_groups(
    component_means: Sequence[float],
    weights: Sequence[float],
    n: int,
    rng: np.random.Generator,
) -> Tuple[GroupedDataset, np.ndarray]:
    """
    k-1 unit-variance 1-D components plus their mixture as group k.

    Returns:
        (dataset, 1-based component label of each mixture sample)
    """
    mus = np.asarray(component_means, dtype=float)
    groups = [mu + rng.standard_normal((n, 1)) for mu in mus]
    labels = rng.choice(mus.size, size=n, p=np.asarray(weights, dtype=float))
    mixture = mus[labels][:, None] + rng.standard_normal((n, 1))
    groups.append(mixture)
    return GroupedDataset.from_arrays(groups), labels + 1


def ood_oracle_ratios(component_means: Sequence[float], weights: Sequence[float]):
    """True ratios p_i / p_mixture for the 1-D setup."""
    mus = np.asarray(component_means, dtype=float)
    w = np.asarray(weights, dtype=float)

    def ratios(X: np.ndarray) -> np.ndarray:
        x = as_points(X, dim=1)[:, 0]
        dens = norm.pdf(x[:, None], loc=mus[None, :])
        return dens / (dens @ w)[:, None]

    return ratios


def mean_auroc(ratios: np.ndarray, labels: np.ndarray) -> AurocReport:
    """AUROC of scoring component i by r_i, averaged over components."""
    per = [auroc(ratios[:, i], (labels == i + 1).astype(int)) for i in range(ratios.shape[1])]
    return AurocReport(per_component=per, mean_auroc=float(np.mean(per)))


def grid_oracle_auroc(
    component_means: Sequence[float],
    weights: Sequence[float],
    lo: float = -15.0,
    hi: float = 15.0,
    points: int = 20001,
) -> AurocReport:
    """
    Population AUROC of the true-ratio scores by numerical integration.

    For component i the positives follow p_i and the negatives the mixture of
    the other components.
    """
    mus = np.asarray(component_means, dtype=float)
    w = np.asarray(weights, dtype=float)
    grid = np.linspace(lo, hi, points)
    dx = grid[1] - grid[0]
    dens = norm.pdf(grid[:, None], loc=mus[None, :])
    scores_all = dens / (dens @ w)[:, None]

    per = []
    for i in range(mus.size):
        pos = dens[:, i] * dx
        others = np.delete(np.arange(mus.size), i)
        neg = dens[:, others] @ (w[others] / w[others].sum()) * dx
        pos, neg = pos / pos.sum(), neg / neg.sum()
        levels, inverse = np.unique(scores_all[:, i], return_inverse=True)
        pos_mass = np.bincount(inverse, weights=pos, minlength=levels.size)
        neg_mass = np.bincount(inverse, weights=neg, minlength=levels.size)
        neg_below = np.cumsum(neg_mass) - neg_mass
        per.append(float(np.sum(pos_mass * (neg_below + 0.5 * neg_mass))))
    return AurocReport(per_component=per, mean_auroc=float(np.mean(per)))


def _ood_job(job: Dict[str, Any]) -> AurocReport:
    seed = int(job["seed"])
    mus, weights = job["component_means"], job["weights"]
    train_set, _ = sample_ood_groups(mus, weights, job["n"], make_rng(seed, "sampling"))
    eval_set, labels = sample_ood_groups(mus, weights, job["n_eval"], make_rng(seed, "eval"))

    method = job["method"]
    model_spec = ModelSpec(**job["model_spec"])
    model: RatioModel = init_model(model_spec, seed, train_set)
    if method != RANDOM_INIT:
        loss_spec = make_loss(method, model_spec.k, alpha=job.get("alpha"))
        cfg = OptimizerConfig(**{**job["optimizer"], "seed": seed})
        validation = None
        if cfg.patience:
            validation, _ = sample_ood_groups(mus, weights, job["n"], make_rng(seed, "validation"))
        model, _ = train(loss_spec, model, train_set, cfg, validation=validation)
    result = mean_auroc(model.evaluate(eval_set.pivot), labels)
    logger.info(f"OOD {method}: mean AUROC {result.mean_auroc:.4f}")
    return result


def run_ood_benchmark(
    component_means: Sequence[float] = OOD_COMPONENTS,
    weights: Optional[Sequence[float]] = None,
    n: int = 1000,
    seed: int = 0,
    methods: Sequence[str] = (RANDOM_INIT, "multilr"),
    n_eval: int = 1000,
    model: Optional[Dict[str, Any]] = None,
    optimizer: Optional[OptimizerConfig] = None,
    alpha: Optional[float] = None,
    n_jobs: int = 1,
) -> OodReport:
    """
    Score mixture samples by each learned r_i and report the mean AUROC of
    recognising component i.

    Args:
        component_means: Means of the k-1 unit-variance components
        weights: Mixture weights (uniform when omitted); positive, summing to 1
        n: Training samples per group
        seed: Seed for sampling, initialisation and shuffling
        methods: random_init, objective names or rule names
        n_eval: Held-out mixture samples
        model: ModelSpec fields other than dim and k (RBF log-linear by default)
        optimizer: Optimizer configuration
        alpha: Method parameter
        n_jobs: Worker processes
    """
    mus = [float(m) for m in component_means]
    if len(mus) < 2:
        raise InvalidInputError("need at least two components")
    if weights is None:
        weights = [1.0 / len(mus)] * len(mus)
    w = np.asarray(weights, dtype=float)
    if w.size != len(mus) or np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-12:
        raise InvalidInputError("mixture weights must be positive, one per component, summing to 1")

    model = dict(model or {"kind": ModelKind.LOGLINEAR.value, "features": FeatureKind.RBF.value})
    optimizer = optimizer or OptimizerConfig(step_size=1e-2, epochs=100)
    jobs = [
        {
            "component_means": mus,
            "weights": w.tolist(),
            "n": n,
            "n_eval": n_eval,
            "seed": seed,
            "method": method,
            "alpha": alpha,
            "model_spec": {**model, "dim": 1, "k": len(mus) + 1},
            "optimizer": optimizer.model_dump(),
        }
        for method in methods
    ]
    results = run_jobs(_ood_job, jobs, n_jobs)

    eval_set, labels = sample_ood_groups(mus, w, n_eval, make_rng(seed, "eval"))
    empirical_oracle = mean_auroc(ood_oracle_ratios(mus, w)(eval_set.pivot), labels)
    logger.info(f"OOD oracle: sample AUROC {empirical_oracle.mean_auroc:.4f}")

    return OodReport(
        component_means=mus,
        mixture_weights=w.tolist(),
        n_per_group=n,
        seed=seed,
        methods=dict(zip(methods, results)),
        oracle_auroc=grid_oracle_auroc(mus, w),
        oracle_sample_auroc=empirical_oracle,
    )
