"""
Utility Functions Package

Validation, numerical guards, seeded random streams and file I/O.
"""

from src.utils.numerics import guards, safe_log
from src.utils.rng import make_rng
from src.utils.validation import as_points, as_probability_vectors, as_ratio_vectors

__all__ = [
    "guards",
    "safe_log",
    "make_rng",
    "as_points",
    "as_probability_vectors",
    "as_ratio_vectors",
]
