"""Deterministic worker-pool helper.

Results always come back in task order, so parallel execution cannot change
any output. The pool is created lazily and reused across calls.
"""

from __future__ import annotations

import atexit
import os
from concurrent.futures import ProcessPoolExecutor

DEFAULT_THREADS_ENV = "HMD_THREADS"

_pool: ProcessPoolExecutor | None = None
_pool_size = 0


def default_threads() -> int:
    """Worker count from the HMD_THREADS environment variable (default 1)."""
    raw = os.environ.get(DEFAULT_THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _get_pool(workers: int) -> ProcessPoolExecutor:
    global _pool, _pool_size
    if _pool is None or _pool_size < workers:
        if _pool is not None:
            _pool.shutdown(wait=False, cancel_futures=True)
        _pool = ProcessPoolExecutor(max_workers=workers)
        _pool_size = workers
    return _pool


def _call(packed):
    fn, args = packed
    return fn(*args)


def pmap(fn, tasks, workers: int) -> list:
    """Map fn over argument tuples, preserving order; serial when workers==1."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    pool = _get_pool(workers)
    return list(pool.map(_call, [(fn, t) for t in tasks]))


@atexit.register
def _shutdown():
    global _pool
    if _pool is not None:
        _pool.shutdown(wait=False, cancel_futures=True)
        _pool = None
