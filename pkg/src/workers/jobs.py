"""
Parallel Job Runner

Runs independent benchmark jobs (seeds, methods, dimensions) in worker
processes. Results come back in submission order, so reports do not depend
on scheduling.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Sequence

from loguru import logger

Job = Dict[str, Any]


def run_jobs(fn: Callable[[Job], Any], jobs: Sequence[Job], n_jobs: int = 1) -> List[Any]:
    """
    Apply a module-level function to every job description.

    Args:
        fn: Picklable function of one job dict
        jobs: Job descriptions
        n_jobs: Worker processes; 1 runs inline in this process

    Returns:
        Results in the order of `jobs`
    """
    jobs = list(jobs)
    if n_jobs <= 1 or len(jobs) <= 1:
        logger.debug(f"Running {len(jobs)} job(s) inline")
        return [fn(job) for job in jobs]

    workers = min(int(n_jobs), len(jobs))
    logger.info(f"Running {len(jobs)} jobs on {workers} worker processes")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))
