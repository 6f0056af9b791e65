"""
multidre
========

Density ratio estimation among k >= 2 distributions from samples.

This package provides:
- Bregman-divergence DRE losses (Multi-LR, LSIF, KLIEP, Power, Quadratic, LogSumExp)
- Proper scoring-rule losses composed with the ratio link (log, Brier, pseudo-spherical)
- Log-linear and MLP ratio models with analytic gradients
- f-divergence estimation, importance sampling, resampling and OOD scoring
- Numerical verifiers for the identities linking the two loss families

Usage:
    multidre train --objective multilr --data g1.csv g2.csv g3.csv
"""

__version__ = "0.1.0"
__author__ = "multidre Contributors"
__license__ = "MIT"
