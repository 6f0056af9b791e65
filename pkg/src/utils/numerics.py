"""
Numerical Guards

Clamped logarithms and a process-wide counter of guarded evaluations.
"""

import threading
from typing import Dict

import numpy as np
from loguru import logger

LOG_FLOOR = 1e-300


class GuardCounter:
    """Counts how often a numerical guard had to intervene."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: Dict[str, int] = {}

    def record(self, name: str, count: int) -> None:
        if count <= 0:
            return
        with self._lock:
            self._counts[name] = self._counts.get(name, 0) + int(count)
        logger.warning(f"Numerical guard '{name}' triggered {count} time(s)")

    def get(self, name: str) -> int:
        with self._lock:
            return self._counts.get(name, 0)

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return dict(self._counts)

    def since(self, before: Dict[str, int]) -> Dict[str, int]:
        """Counts recorded after `before` was taken with snapshot()."""
        now = self.snapshot()
        delta = {name: count - before.get(name, 0) for name, count in now.items()}
        return {name: count for name, count in delta.items() if count > 0}

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


guards = GuardCounter()


def safe_log(x: np.ndarray) -> np.ndarray:
    """Natural log with arguments clamped below at 1e-300."""
    x = np.asarray(x, dtype=float)
    low = x < LOG_FLOOR
    if np.any(low):
        guards.record("log_clamp", int(np.count_nonzero(low)))
        x = np.maximum(x, LOG_FLOOR)
    return np.log(x)
