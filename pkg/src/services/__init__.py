"""
Estimation Services

- link: class probabilities <-> canonical density ratios
- objectives: convex functions, Bregman divergences, DRE loss
- scoring: proper scoring rules through the inverse link
- optimizers / trainer: first-order training and gradient checks
- theory: f-divergence estimators and identity verifiers
- applications: pairwise ratios, MAE, importance sampling, SIR, AUROC
- bench: synthetic Gaussian and OOD benchmarks
"""
