"""
Workers Package

Process-parallel execution of independent benchmark jobs.
"""

from src.workers.jobs import run_jobs

__all__ = ["run_jobs"]
