"""
Divergence Estimators and Identity Verifiers

Multi-distribution f-divergences (plug-in and variational), the
perspective-type convex functions f* and f*_pi that carry simplex-space
Bregman divergences to ratio space, and numerical checks of the identities
connecting classification regret with the Bregman DRE loss.
"""

from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from src.exceptions import DimensionMismatchError, InvalidInputError
from src.models.base import RatioModel
from src.models.loglinear import LogLinearModel
from src.schemas.core import DiscreteExperiment, GroupedDataset, Prior
from src.schemas.reports import TheoryCheck, TheoryReport
from src.services.link import link_forward
from src.services.objectives import (
    ConvexObjective,
    LossBatch,
    MultiLRObjective,
    NormalizedObjective,
    dre_loss,
    make_objective,
)
from src.services.scoring import RuleKind, ScoringRule, expected_loss, make_rule
from src.utils.rng import make_rng
from src.utils.validation import as_points, as_ratio_vectors

RatioFn = Callable[[np.ndarray], np.ndarray]


# =============================================================================
# f-divergence estimators
# =============================================================================

def normalized(obj: ConvexObjective) -> NormalizedObjective:
    """f~(r) = B_f(r, 1); already-normalised objectives pass through."""
    return obj if isinstance(obj, NormalizedObjective) else NormalizedObjective(obj)


def fdiv_plugin_with_se(
    obj: ConvexObjective,
    true_ratio: RatioFn,
    pivot_samples: np.ndarray,
) -> Tuple[float, float]:
    """
    Plug-in divergence estimate and its Monte-Carlo standard error.

    Returns:
        (mean of f~(r(x)) over pivot samples, standard error)
    """
    X = as_points(pivot_samples)
    r = as_ratio_vectors(true_ratio(X), k=obj.k)
    values = normalized(obj).value(r)
    n = values.size
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return float(np.mean(values)), se


def fdiv_plugin(obj: ConvexObjective, true_ratio: RatioFn, pivot_samples: np.ndarray) -> float:
    """
    Multi-distribution f-divergence E_{p_k}[f~(r(x))] from known ratios.

    Args:
        obj: Convex objective; normalised to f~ = B_f(., 1)
        true_ratio: Maps (n, d) points to (n, k-1) ratios
        pivot_samples: Samples from the pivot distribution
    """
    return fdiv_plugin_with_se(obj, true_ratio, pivot_samples)[0]


def _fenchel_dual(f: ConvexObjective, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Dual point s = grad f(r) and the conjugate f^*(s) = <s, r> - f(r)."""
    s = f.gradient(r)
    return s, np.sum(s * r, axis=1) - f.value(r)


def fdiv_variational(obj: ConvexObjective, model: RatioModel, dataset: GroupedDataset) -> float:
    """
    Variational lower bound on the f~-divergence with the dual witness taken
    from the candidate ratios r^ of `model`:

        sum_i mean_{p_i}[s_i] - mean_{p_k}[f~^*(s)],   s = grad f~(r^)

    Equals the negated DRE loss of f~ on the same samples.
    """
    f = normalized(obj)
    if dataset.k != f.k:
        raise DimensionMismatchError(f"dataset has {dataset.k} groups, objective expects k={f.k}")
    value = 0.0
    for i, X in enumerate(dataset.groups[:-1]):
        s, _ = _fenchel_dual(f, as_ratio_vectors(model.evaluate(X), k=f.k))
        value += float(np.mean(s[:, i]))
    _, conjugate = _fenchel_dual(f, as_ratio_vectors(model.evaluate(dataset.pivot), k=f.k))
    return value - float(np.mean(conjugate))


def jensen_shannon_divergence(ratios: np.ndarray) -> float:
    """
    (1/k) sum_i KL(P_i || mean of P_1..P_k) from canonical ratios at pivot samples.

    Uses the uniform Multi-LR function, whose f-divergence is JS - log k.
    """
    r = as_ratio_vectors(ratios)
    k = r.shape[1] + 1
    f = MultiLRObjective(k)
    return float(np.mean(f.value(r)) + np.log(k))


def plugin_exact(obj: ConvexObjective, experiment: DiscreteExperiment) -> float:
    """f~-divergence of a discrete experiment, by exact summation."""
    r = experiment.true_ratios()
    return float(experiment.array[-1] @ normalized(obj).value(r))


def variational_exact(
    obj: ConvexObjective,
    experiment: DiscreteExperiment,
    candidate: Optional[np.ndarray] = None,
) -> float:
    """
    Variational objective of a discrete experiment with exact expectations.

    Args:
        obj: Convex objective
        experiment: Discrete distributions
        candidate: (m, k-1) candidate ratios; the true ratios when omitted
    """
    f = normalized(obj)
    r = experiment.true_ratios() if candidate is None else as_ratio_vectors(candidate, k=obj.k)
    P = experiment.array
    s, conjugate = _fenchel_dual(f, r)
    value = sum(P[i] @ s[:, i] for i in range(obj.k - 1))
    return float(value - P[-1] @ conjugate)


# =============================================================================
# Associated convex functions
# =============================================================================

class AssociatedConvex(ConvexObjective):
    """
    f*(u) = s f(u / s) with s = 1 + sum(u), and its prior-scaled version
    f*_pi(r) = f*(pi_{1:k-1} * r / pi_k).

    The base f is evaluated on reduced-simplex points u / s; the implicit
    k-th coordinate of u is 1.
    """

    def __init__(self, base: ConvexObjective, prior: Optional[Prior] = None):
        super().__init__(base.k)
        if prior is not None and prior.k != base.k:
            raise DimensionMismatchError(f"prior has k={prior.k}, base has k={base.k}")
        self.base = base
        self.prior = prior
        self.kind = f"associated[{base.kind}]"
        if prior is None:
            self._scale = np.ones(self.width)
        else:
            pi = prior.array
            self._scale = pi[:-1] / pi[-1]

    def _inner(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        u = r * self._scale[None, :]
        s = 1.0 + u.sum(axis=1)
        return u, s, u / s[:, None]

    def value(self, r: np.ndarray) -> np.ndarray:
        _, s, w = self._inner(r)
        return s * self.base.value(w)

    def gradient(self, r: np.ndarray) -> np.ndarray:
        # grad f*(u) = f(w) 1 + grad f(w) - <grad f(w), w> 1
        _, _, w = self._inner(r)
        g = self.base.gradient(w)
        shift = self.base.value(w) - np.sum(g * w, axis=1)
        return (g + shift[:, None]) * self._scale[None, :]

    def hessian_vector(self, r: np.ndarray, v: np.ndarray) -> np.ndarray:
        # Hess f*(u) = P^T Hess f(w) P / s with P = I - w 1^T
        _, s, w = self._inner(r)
        v = v * self._scale[None, :]
        pv = v - w * v.sum(axis=1, keepdims=True)
        hpv = self.base.hessian_vector(w, pv)
        out = hpv - np.sum(w * hpv, axis=1, keepdims=True)
        return out / s[:, None] * self._scale[None, :]

    def params(self):
        out = {"kind": "associated", "base": self.base.params()}
        if self.prior is not None:
            out["prior"] = self.prior.weights
        return out


class ExpectedLossConvex(ConvexObjective):
    """
    f = -L_(q) in reduced simplex coordinates, where L_(q) = sum_i q_i l(i, q)
    is the generalised entropy of a proper scoring rule and q_k = 1 - sum(q).

    By properness d_i f(q) = -(l(i, q) - l(k, q)).
    """

    def __init__(self, rule: ScoringRule, k: int):
        super().__init__(k)
        self.rule = rule
        self.kind = f"entropy[{rule.kind.value}]"

    def _full(self, q: np.ndarray) -> np.ndarray:
        last = 1.0 - q.sum(axis=1, keepdims=True)
        if np.any(last <= 0.0):
            raise InvalidInputError("reduced simplex point has no mass left for the last class")
        return np.concatenate([q, last], axis=1)

    def _table(self, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        full = self._full(q)
        return full, self.rule.loss_table(np.log(full))

    def value(self, q: np.ndarray) -> np.ndarray:
        full, table = self._table(q)
        return -np.sum(full * table, axis=1)

    def gradient(self, q: np.ndarray) -> np.ndarray:
        _, table = self._table(q)
        return -(table[:, :-1] - table[:, -1:])

    def hessian_vector(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        full = self._full(q)
        if self.rule.kind == RuleKind.LOG:
            # Hess = diag(1 / q_i) + 1 1^T / q_k
            return v / q + (v.sum(axis=1) / full[:, -1])[:, None]
        if self.rule.kind == RuleKind.BRIER:
            # f(q) = ||q_full||^2 - 1
            return 2.0 * (v + v.sum(axis=1, keepdims=True))
        return self.difference_hessian_vector(q, v)

    def difference_hessian_vector(self, q: np.ndarray, v: np.ndarray, h: float = 1e-6) -> np.ndarray:
        """Central difference of the analytic gradient along v."""
        return (self.gradient(q + h * v) - self.gradient(q - h * v)) / (2.0 * h)

    def params(self):
        return {"kind": "entropy", "rule": self.rule.params()}


# =============================================================================
# Verifiers
# =============================================================================

def verify_bregman_identity(f: ConvexObjective, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Residual of B_f(u/(1+sum u), v/(1+sum v)) = B_{f*}(u, v) / (1 + sum u).

    The k-th coordinates of u and v are taken as 1, so the normalisers read
    1 + sum over the first k-1 entries.

    Returns:
        Absolute residual; a float for single vectors, an array for batches
    """
    single = np.ndim(u) == 1
    u = as_ratio_vectors(u, k=f.k)
    v = as_ratio_vectors(v, k=f.k)
    su = 1.0 + u.sum(axis=1)
    sv = 1.0 + v.sum(axis=1)
    lhs = f.bregman(u / su[:, None], v / sv[:, None])
    rhs = AssociatedConvex(f).bregman(u, v) / su
    res = np.abs(lhs - rhs)
    return float(res[0]) if single else res


def verify_prior_identity(
    f: ConvexObjective,
    eta: np.ndarray,
    eta_hat: np.ndarray,
    prior: Prior,
) -> np.ndarray:
    """
    Residual of B_f(eta, eta_hat) (pi_k + sum_i pi_i r_i) = pi_k B_{f*_pi}(r, r_hat)
    with r = link_forward(eta), r_hat = link_forward(eta_hat) and f applied to
    the first k-1 probabilities.
    """
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    eta_hat = np.atleast_2d(np.asarray(eta_hat, dtype=float))
    r = np.atleast_2d(link_forward(eta, prior))
    r_hat = np.atleast_2d(link_forward(eta_hat, prior))
    pi = prior.array
    lhs = f.bregman(eta[:, :-1], eta_hat[:, :-1]) * (pi[-1] + r @ pi[:-1])
    rhs = pi[-1] * AssociatedConvex(f, prior).bregman(r, r_hat)
    return np.abs(lhs - rhs)


def classification_regret(
    rule: ScoringRule,
    experiment: DiscreteExperiment,
    eta_hat: np.ndarray,
) -> float:
    """sum_x M(x) [L(eta(x), eta_hat(x)) - L(eta(x), eta(x))], exactly."""
    eta = experiment.posterior()
    gap = expected_loss(rule, eta, eta_hat) - expected_loss(rule, eta, eta)
    return float(experiment.mixture() @ gap)


def ratio_regret(
    rule: ScoringRule,
    experiment: DiscreteExperiment,
    eta_hat: np.ndarray,
) -> float:
    """pi_k E_{p_k}[B_{f*_pi}(r, r_hat)] with f = -L_ of the rule, exactly."""
    prior = experiment.prior
    r = link_forward(experiment.posterior(), prior)
    r_hat = link_forward(eta_hat, prior)
    f = AssociatedConvex(ExpectedLossConvex(rule, experiment.k), prior)
    return float(prior.array[-1] * (experiment.array[-1] @ f.bregman(r, r_hat)))


def verify_regret_identity(
    rule: ScoringRule,
    experiment: DiscreteExperiment,
    eta_hat: Union[np.ndarray, Callable[[int], np.ndarray]],
) -> float:
    """
    |classification regret - pi_k E_{p_k} B_{f*_pi}(r, r_hat)| on a finite support.

    Args:
        rule: Proper scoring rule
        experiment: Discrete experiment (prior and conditionals)
        eta_hat: (m, k) predicted class probabilities, or a function of the
            support index returning one probability vector

    Returns:
        Absolute residual
    """
    if callable(eta_hat):
        eta_hat = np.vstack([np.asarray(eta_hat(j), dtype=float) for j in range(experiment.m)])
    eta_hat = np.asarray(eta_hat, dtype=float)
    if eta_hat.shape != (experiment.m, experiment.k):
        raise DimensionMismatchError(
            f"eta_hat must have shape ({experiment.m}, {experiment.k}), got {eta_hat.shape}"
        )
    if np.any(eta_hat <= 0.0):
        raise InvalidInputError("eta_hat must be strictly positive")
    lhs = classification_regret(rule, experiment, eta_hat)
    rhs = ratio_regret(rule, experiment, eta_hat)
    return abs(lhs - rhs)


def midpoint_convexity_gap(f: ConvexObjective, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """f((u+v)/2) - (f(u)+f(v))/2 per row; nonpositive for convex f."""
    return f.value(0.5 * (u + v)) - 0.5 * (f.value(u) + f.value(v))


# =============================================================================
# Suite
# =============================================================================

def _log_uniform(rng: np.random.Generator, size) -> np.ndarray:
    return np.exp(rng.uniform(-3.0, 3.0, size=size))


def _interior_simplex(rng: np.random.Generator, size: int, k: int) -> np.ndarray:
    """Dirichlet draws mixed with the uniform vector, bounded away from the faces."""
    return 0.9 * rng.dirichlet(np.ones(k), size=size) + 0.1 / k


def _random_experiment(rng: np.random.Generator, k: int, m: int, prior: Prior) -> DiscreteExperiment:
    P = 0.8 * rng.dirichlet(np.ones(m), size=k) + 0.2 / m
    P = P / P.sum(axis=1, keepdims=True)
    return DiscreteExperiment(prior=prior, conditionals=P.tolist())


def _check(name: str, residuals, threshold: float, trials: int) -> TheoryCheck:
    worst = float(np.max(residuals)) if np.size(residuals) else 0.0
    passed = bool(worst <= threshold)
    if not passed:
        logger.warning(f"{name}: max residual {worst:.3g} exceeds {threshold:g}")
    return TheoryCheck(name=name, max_residual=worst, threshold=threshold, trials=trials, passed=passed)


def run_theory_suite(trials: int = 1000, seed: int = 0) -> TheoryReport:
    """
    Run every identity verifier on seeded random instances.

    Args:
        trials: Random instances per verifier
        seed: Run seed

    Returns:
        TheoryReport with the maximal residual of each check
    """
    rng = make_rng(seed, "eval", "theory")
    checks: List[TheoryCheck] = []
    ks = (2, 3, 5)

    bases: Dict[str, Callable[[int], ConvexObjective]] = {
        "lsif": lambda k: make_objective("lsif", k),
        "kliep": lambda k: make_objective("kliep", k),
        "power1.5": lambda k: make_objective("power", k, alpha=1.5),
    }

    # Bregman identity of the perspective function
    for name, build in bases.items():
        res = []
        for k in ks:
            n = trials // len(ks) + 1
            u = _log_uniform(rng, (n, k - 1))
            v = _log_uniform(rng, (n, k - 1))
            res.append(verify_bregman_identity(build(k), u, v))
        checks.append(_check(f"bregman_identity[{name}]", np.concatenate(res), 1e-10, trials))

    scalar = verify_bregman_identity(make_objective("power", 2, alpha=2.0), np.array([2.0]), np.array([1.0]))
    checks.append(_check("bregman_identity[scalar t^2]", [scalar], 1e-12, 1))

    # Prior-scaled identity through the inverse link
    res = []
    for k in ks:
        n = trials // len(ks) + 1
        for name, build in bases.items():
            f = build(k)
            pi = Prior.from_counts(_interior_simplex(rng, 1, k)[0])
            eta = _interior_simplex(rng, n, k)
            eta_hat = _interior_simplex(rng, n, k)
            res.append(verify_prior_identity(f, eta, eta_hat, pi))
    checks.append(_check("prior_identity", np.concatenate(res), 1e-10, trials))

    # Regret equals the ratio-space Bregman divergence
    priors = {2: [Prior.uniform(2), Prior(weights=[0.4, 0.6])], 3: [Prior.uniform(3), Prior(weights=[0.2, 0.3, 0.5])]}
    for rule_name in ("log", "brier"):
        rule = make_rule(rule_name)
        res = []
        for t in range(trials):
            k = 2 + t % 2
            m = 2 + (t // 2) % 2
            prior = priors[k][(t // 4) % 2]
            experiment = _random_experiment(rng, k, m, prior)
            eta_hat = _interior_simplex(rng, m, k)
            res.append(verify_regret_identity(rule, experiment, eta_hat))
        checks.append(_check(f"regret_identity[{rule_name}]", res, 1e-10, trials))

    # Fenchel-form variational value equals the negated normalised loss
    res = []
    n_models = max(1, min(trials, 50))
    for t in range(n_models):
        k = ks[t % len(ks)]
        dim = 2
        dataset = GroupedDataset.from_arrays([rng.normal(0.3 * i, 1.0, size=(20, dim)) for i in range(k)])
        model = LogLinearModel(dim, k)
        model.set_params(0.3 * rng.standard_normal(model.n_params))
        for kind in ("multilr", "lsif", "kliep", "power", "quadratic", "logsumexp"):
            obj = make_objective(kind, k)
            batch = LossBatch.from_model(model, dataset)
            loss = dre_loss(NormalizedObjective(obj), batch)
            res.append(abs(fdiv_variational(obj, model, dataset) + loss) / (1.0 + abs(loss)))
    checks.append(_check("variational_duality", res, 1e-12, n_models))

    # At the true ratios the variational value equals the divergence
    res = []
    for t in range(n_models):
        k = ks[t % len(ks)]
        experiment = _random_experiment(rng, k, 4, Prior.uniform(k))
        for kind in ("lsif", "kliep", "power"):
            obj = make_objective(kind, k)
            res.append(abs(variational_exact(obj, experiment) - plugin_exact(obj, experiment)))
    checks.append(_check("variational_tightness", res, 1e-10, n_models))

    # Midpoint convexity of the perspective function
    for name, build in bases.items():
        res = []
        for k in ks:
            n = trials // len(ks) + 1
            u = _log_uniform(rng, (n, k - 1))
            v = _log_uniform(rng, (n, k - 1))
            f = AssociatedConvex(build(k))
            gap = midpoint_convexity_gap(f, u, v)
            scale = 1.0 + 0.5 * np.abs(f.value(u) + f.value(v))
            res.append(np.maximum(gap, 0.0) / scale)
        checks.append(_check(f"perspective_convexity[{name}]", np.concatenate(res), 1e-12, trials))

    report = TheoryReport(
        seed=seed,
        trials=trials,
        checks=checks,
        passed=all(c.passed for c in checks),
    )
    logger.info(f"Theory suite: {len(checks)} checks, passed={report.passed}")
    return report
